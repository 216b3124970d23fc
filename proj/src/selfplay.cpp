#include "zerosweep/selfplay.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "zerosweep/checkpoint.h"
#include "zerosweep/errors.h"
#include "zerosweep/util.h"

namespace zs {
namespace {

enum SeedStream : std::uint64_t { kInit = 1, kEpisode = 2, kTrain = 3, kArena = 4 };

constexpr char kBufferMagic[4] = {'Z', 'S', 'R', 'B'};

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void i32(std::int32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void f64s(const std::vector<double>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    raw(v.data(), v.size() * sizeof(double));
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::int32_t i32() { return get<std::int32_t>(); }
  double f64() { return get<double>(); }
  std::vector<double> f64s() {
    const std::uint32_t n = u32();
    need(static_cast<std::size_t>(n) * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  template <class T>
  T get() {
    T v;
    raw(&v, sizeof v);
    return v;
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw std::runtime_error("replay buffer file is truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

void check_stop(const std::atomic<bool>* stop) {
  if (stop && stop->load()) throw Interrupted("stop requested");
}

nlohmann::json loss_json(const LossBreakdown& l) {
  return {{"total", l.total}, {"policy", l.policy}, {"value", l.value}};
}

}  // namespace

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("replay buffer capacity must be >= 1");
}

std::size_t ReplayBuffer::example_count() const {
  std::size_t n = 0;
  for (const Slot& s : slots_) n += s.examples.size();
  return n;
}

void ReplayBuffer::add(int iteration, std::vector<TrainingExample> examples) {
  slots_.push_back({iteration, std::move(examples)});
  while (static_cast<int>(slots_.size()) > capacity_) slots_.pop_front();
}

std::vector<const TrainingExample*> ReplayBuffer::window(int rs) const {
  if (rs < 1) throw ConfigError("retrain window must be >= 1");
  const std::size_t keep = std::min<std::size_t>(rs, slots_.size());
  std::vector<const TrainingExample*> out;
  for (std::size_t k = slots_.size() - keep; k < slots_.size(); ++k) {
    for (const TrainingExample& e : slots_[k].examples) out.push_back(&e);
  }
  return out;
}

std::vector<std::uint8_t> ReplayBuffer::serialize() const {
  Writer w;
  w.raw(kBufferMagic, 4);
  w.u32(static_cast<std::uint32_t>(capacity_));
  w.u32(static_cast<std::uint32_t>(slots_.size()));
  for (const Slot& s : slots_) {
    w.i32(s.iteration);
    w.u32(static_cast<std::uint32_t>(s.examples.size()));
    for (const TrainingExample& e : s.examples) {
      w.f64s(e.input);
      w.f64s(e.policy);
      w.f64(e.z);
    }
  }
  return std::move(w.bytes);
}

ReplayBuffer ReplayBuffer::deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kBufferMagic, 4) != 0) throw std::runtime_error("not a replay buffer file");
  ReplayBuffer buffer(static_cast<int>(r.u32()));
  const std::uint32_t slots = r.u32();
  for (std::uint32_t k = 0; k < slots; ++k) {
    Slot s;
    s.iteration = r.i32();
    const std::uint32_t count = r.u32();
    s.examples.resize(count);
    for (TrainingExample& e : s.examples) {
      e.input = r.f64s();
      e.policy = r.f64s();
      e.z = r.f64();
      e.iteration = s.iteration;
    }
    buffer.slots_.push_back(std::move(s));
  }
  if (!r.done()) throw std::runtime_error("trailing bytes in replay buffer file");
  return buffer;
}

void ReplayBuffer::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

ReplayBuffer ReplayBuffer::load(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

bool ReplayBuffer::operator==(const ReplayBuffer& o) const {
  if (capacity_ != o.capacity_ || slots_.size() != o.slots_.size()) return false;
  for (std::size_t k = 0; k < slots_.size(); ++k) {
    const Slot& a = slots_[k];
    const Slot& b = o.slots_[k];
    if (a.iteration != b.iteration || a.examples.size() != b.examples.size()) return false;
    for (std::size_t i = 0; i < a.examples.size(); ++i) {
      const TrainingExample& x = a.examples[i];
      const TrainingExample& y = b.examples[i];
      if (x.input != y.input || x.policy != y.policy || x.z != y.z) return false;
    }
  }
  return true;
}

std::vector<TrainingExample> label_examples(const std::vector<EpisodeStep>& steps, Outcome result,
                                            bool augment, int iteration) {
  std::vector<TrainingExample> out;
  for (const EpisodeStep& step : steps) {
    const double z = outcome_value(result, step.state.to_move());
    if (augment) {
      for (const SymmetricSample& s : symmetries(step.state, step.pi)) {
        out.push_back({encode(s.state), s.policy, z, iteration});
      }
    } else {
      out.push_back({encode(step.state), step.pi, z, iteration});
    }
  }
  return out;
}

Episode run_episode(const Evaluator& evaluator, const GameSpec& spec, const HyperParams& params,
                    std::uint64_t seed, int iteration) {
  std::mt19937_64 rng(seed);
  const SearchConfig search = params.search_config();
  std::vector<EpisodeStep> steps;
  GameState s = initial_state(spec);
  while (outcome(s) == Outcome::kOngoing) {
    const ActionMask legal = legal_actions(s);
    std::vector<double> pi;
    if (std::count(legal.begin(), legal.end(), 1) == 1) {
      pi.assign(legal.size(), 0.0);
      pi[std::find(legal.begin(), legal.end(), 1) - legal.begin()] = 1.0;
    } else {
      pi = run_search(s, evaluator, search).pi;
    }
    const Action a = select_action(pi, static_cast<int>(steps.size()), params.T_prime, rng);
    steps.push_back({s, std::move(pi)});
    s = apply(s, a);
  }
  Episode e;
  e.plies = static_cast<int>(steps.size());
  e.outcome = outcome(s);
  e.examples = label_examples(steps, e.outcome, params.augment_symmetries, iteration);
  return e;
}

bool arena_accepts(int wins, int losses, double u) {
  if (wins + losses == 0) return false;
  return static_cast<double>(wins) / (wins + losses) > u;
}

ArenaResult arena(const Agent& challenger, const Agent& incumbent, const GameSpec& spec, int n,
                  double u, std::uint64_t seed, int parallelism) {
  if (n < 1) throw ConfigError("arena needs n >= 1 games");
  ArenaResult r;
  r.enabled = true;
  r.scores.assign(n, 0.0);
  parallel_for(n, parallelism, [&](long g) {
    const bool challenger_first = g % 2 == 0;
    const GameRecord rec =
        challenger_first
            ? play_game(spec, challenger, incumbent, derive_seed(seed, {static_cast<std::uint64_t>(g)}))
            : play_game(spec, incumbent, challenger, derive_seed(seed, {static_cast<std::uint64_t>(g)}));
    const double v =
        outcome_value(rec.outcome, challenger_first ? Player::kP1 : Player::kP2);
    r.scores[g] = 0.5 * (v + 1.0);
  });
  for (double s : r.scores) {
    if (s == 1.0) ++r.wins;
    else if (s == 0.0) ++r.losses;
    else ++r.draws;
  }
  r.accepted = arena_accepts(r.wins, r.losses, u);
  return r;
}

nlohmann::json IterationReport::to_json() const {
  nlohmann::json losses = nlohmann::json::array();
  for (const LossBreakdown& l : epoch_losses) losses.push_back(loss_json(l));
  nlohmann::json a = {{"enabled", arena.enabled}, {"accepted", arena.accepted}};
  if (arena.enabled) {
    a["wins"] = arena.wins;
    a["draws"] = arena.draws;
    a["losses"] = arena.losses;
  }
  return {{"iteration", iteration},
          {"examples", examples},
          {"train_examples", train_examples},
          {"plies", plies},
          {"epoch_losses", losses},
          {"arena", a},
          {"elo", {{"incumbent", elo.incumbent}, {"challenger", elo.challenger}}}};
}

nlohmann::json IterationReport::timings_json() const {
  return {{"iteration", iteration},
          {"selfplay", timings.selfplay},
          {"training", timings.training},
          {"arena", timings.arena},
          {"total", timings.total}};
}

IterationReport IterationReport::from_json(const nlohmann::json& j) {
  IterationReport r;
  r.iteration = j.at("iteration").get<int>();
  r.examples = j.at("examples").get<int>();
  r.train_examples = j.at("train_examples").get<int>();
  r.plies = j.value("plies", 0);
  for (const auto& l : j.at("epoch_losses")) {
    r.epoch_losses.push_back(
        {l.at("total").get<double>(), l.at("policy").get<double>(), l.at("value").get<double>()});
  }
  const auto& a = j.at("arena");
  r.arena.enabled = a.at("enabled").get<bool>();
  r.arena.accepted = a.at("accepted").get<bool>();
  if (r.arena.enabled) {
    r.arena.wins = a.at("wins").get<int>();
    r.arena.draws = a.at("draws").get<int>();
    r.arena.losses = a.at("losses").get<int>();
  }
  r.elo.incumbent = j.at("elo").at("incumbent").get<double>();
  r.elo.challenger = j.at("elo").at("challenger").get<double>();
  return r;
}

IterationResult run_iteration(const NetworkWeights& best, ReplayBuffer& buffer,
                              const IterationInput& in) {
  const Stopwatch whole;
  const auto iter = static_cast<std::uint64_t>(in.iteration);
  const HyperParams& p = in.params;
  IterationReport report;
  report.iteration = in.iteration;

  // Stage 1: self-play against a snapshot of the best network.
  Stopwatch watch;
  const NetworkEvaluator evaluator(std::make_shared<NetworkWeights>(best));
  std::vector<Episode> episodes(p.E);
  parallel_for(p.E, in.parallelism, [&](long e) {
    check_stop(in.stop);
    episodes[e] = run_episode(evaluator, in.spec, p,
                              derive_seed(in.run_seed, {kEpisode, iter, static_cast<std::uint64_t>(e)}),
                              in.iteration);
  });
  std::vector<TrainingExample> produced;
  for (Episode& e : episodes) {
    report.plies += e.plies;
    for (TrainingExample& x : e.examples) produced.push_back(std::move(x));
  }
  report.examples = static_cast<int>(produced.size());
  report.timings.selfplay = watch.seconds();
  check_stop(in.stop);

  // Stage 2: train a copy of the best network on the recent window. The
  // buffer is only extended once the iteration commits.
  watch = Stopwatch();
  ReplayBuffer extended = buffer;
  extended.add(in.iteration, std::move(produced));
  const auto window = extended.window(p.rs);
  report.train_examples = static_cast<int>(window.size());
  TrainResult trained = train_epochs(best, window, p.train_config(), p.loss_target,
                                     derive_seed(in.run_seed, {kTrain, iter}));
  report.epoch_losses = trained.epoch_losses;
  for (const LossBreakdown& l : report.epoch_losses) {
    if (!std::isfinite(l.total)) throw NumericalError("training loss is not finite");
  }
  report.timings.training = watch.seconds();
  check_stop(in.stop);

  // Stage 3: arena, or automatic acceptance.
  watch = Stopwatch();
  IterationResult result{best, false, {}};
  if (p.arena_enabled) {
    auto challenger_weights = std::make_shared<const NetworkWeights>(trained.weights);
    auto incumbent_weights = std::make_shared<const NetworkWeights>(best);
    const MctsAgent challenger("challenger", challenger_weights, p.search_config());
    const MctsAgent incumbent("incumbent", incumbent_weights, p.search_config());
    report.arena = arena(challenger, incumbent, in.spec, p.n, p.u,
                         derive_seed(in.run_seed, {kArena, iter}), in.parallelism);
    report.elo = training_elo_step(in.incumbent_elo, report.arena.scores, p.elo_k);
  } else {
    report.arena.accepted = true;
    report.elo = {in.incumbent_elo, in.incumbent_elo};
  }
  result.accepted = report.arena.accepted;
  if (result.accepted) result.best = std::move(trained.weights);
  report.timings.arena = watch.seconds();

  buffer = std::move(extended);
  report.timings.total = whole.seconds();
  result.report = std::move(report);
  return result;
}

std::string checkpoint_name(const GameSpec& spec, int iteration) {
  return std::string(to_string(spec.kind())) + "_" + std::to_string(spec.board_size()) + "_iter" +
         std::to_string(iteration) + ".ckpt";
}

namespace {

std::string buffer_name(int completed) { return "buffer_" + std::to_string(completed) + ".bin"; }

// The parts of a configuration that determine the results.
nlohmann::json identity(const RunConfig& c) {
  nlohmann::json j = c.to_json();
  j.erase("output");
  j.erase("parallelism");
  return j;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::vector<std::string> lines;
  std::ifstream f(path);
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_file_atomic(path, text);
}

void append_line(const std::filesystem::path& path, const std::string& line) {
  std::ofstream f(path, std::ios::app);
  if (!f) throw std::runtime_error("cannot append to " + path.string());
  f << line << '\n';
  f.flush();
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

CheckpointMetadata metadata(const HyperParams& p, int iteration) {
  return {iteration, to_string(p.loss_target), p.to_json()};
}

}  // namespace

TrainOutcome train_full(const RunConfig& config, const TrainOptions& options) {
  const GameSpec spec = config.spec();
  const HyperParams& p = config.params;
  p.validate();
  namespace fs = std::filesystem;
  const bool persist = !options.output_dir.empty();
  const fs::path dir = options.output_dir;
  const fs::path manifest = dir / "run.json";
  const fs::path metrics = dir / "metrics.jsonl";
  const fs::path timings = dir / "timings.jsonl";

  TrainOutcome out{NetworkWeights::random(spec, p.arch, derive_seed(config.seed, {kInit})), {}};
  ReplayBuffer buffer(p.buffer_capacity());
  int completed = 0;
  int best_iteration = 0;
  double incumbent_elo = 1000.0;

  auto write_manifest = [&](const std::string& status) {
    nlohmann::json m = {{"config", config.to_json()},
                        {"completed_iterations", completed},
                        {"status", status},
                        {"best_checkpoint", checkpoint_name(spec, best_iteration)},
                        {"buffer", completed > 0 ? buffer_name(completed) : ""},
                        {"incumbent_elo", incumbent_elo}};
    write_file_atomic(manifest, m.dump(2) + "\n");
  };

  if (persist) {
    fs::create_directories(dir);
    if (fs::exists(manifest)) {
      if (!options.resume) {
        throw ConfigError(dir.string() + " already holds a run; resume it or pick another directory");
      }
      nlohmann::json m;
      try {
        m = nlohmann::json::parse(read_file(manifest));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(manifest.string() + ": " + e.what());
      }
      const RunConfig previous = RunConfig::from_json(m.at("config"));
      if (identity(previous) != identity(config)) {
        throw ConfigError(manifest.string() + " was written for a different configuration");
      }
      completed = m.at("completed_iterations").get<int>();
      incumbent_elo = m.at("incumbent_elo").get<double>();
      const std::string best_name = m.at("best_checkpoint").get<std::string>();
      best_iteration = std::stoi(best_name.substr(best_name.rfind("iter") + 4));
      out.best = load_checkpoint_file(dir / best_name, spec).weights;
      if (completed > 0) buffer = ReplayBuffer::load(dir / m.at("buffer").get<std::string>());
      // Drop records of an iteration that did not commit.
      auto lines = read_lines(metrics);
      auto time_lines = read_lines(timings);
      if (static_cast<int>(lines.size()) < completed) {
        throw ConfigError(metrics.string() + " has fewer records than run.json reports");
      }
      lines.resize(completed);
      if (static_cast<int>(time_lines.size()) > completed) time_lines.resize(completed);
      write_lines(metrics, lines);
      write_lines(timings, time_lines);
      for (const auto& l : lines) out.reports.push_back(IterationReport::from_json(nlohmann::json::parse(l)));
      if (options.log) *options.log << "resuming after iteration " << completed << "\n";
    } else {
      write_lines(metrics, {});
      write_lines(timings, {});
      save_checkpoint_file(dir / checkpoint_name(spec, 0), out.best, metadata(p, 0));
      write_manifest("running");
    }
  }

  for (int it = completed + 1; it <= p.I; ++it) {
    IterationInput in{spec, p, it, config.seed, incumbent_elo, options.parallelism, options.stop};
    std::optional<IterationResult> step;
    try {
      check_stop(options.stop);
      step.emplace(run_iteration(out.best, buffer, in));
    } catch (const Interrupted&) {
      if (persist) write_manifest("interrupted");
      throw;
    }
    IterationResult& r = *step;
    incumbent_elo = next_incumbent_rating(r.report.elo, r.accepted);
    if (r.accepted) best_iteration = it;
    out.best = std::move(r.best);
    completed = it;
    if (persist) {
      if (r.accepted) save_checkpoint_file(dir / checkpoint_name(spec, it), out.best, metadata(p, it));
      save_checkpoint_file(dir / "best.ckpt", out.best, metadata(p, best_iteration));
      buffer.save(dir / buffer_name(it));
      append_line(metrics, r.report.to_json().dump());
      append_line(timings, r.report.timings_json().dump());
      write_manifest(it == p.I ? "complete" : "running");
      std::error_code ignored;
      if (it > 1) fs::remove(dir / buffer_name(it - 1), ignored);
    }
    if (options.log) {
      const auto& l = r.report.epoch_losses.back();
      *options.log << "iteration " << it << "/" << p.I << "  loss " << l.total << " (p " << l.policy
                   << ", v " << l.value << ")";
      if (r.report.arena.enabled) {
        *options.log << "  arena " << r.report.arena.wins << "-" << r.report.arena.draws << "-"
                     << r.report.arena.losses << (r.accepted ? " accepted" : " rejected");
      }
      *options.log << "  " << r.report.timings.total << "s\n";
    }
    if (options.on_iteration) options.on_iteration(r.report);
    out.reports.push_back(std::move(r.report));
  }
  if (persist && completed == p.I && !fs::exists(dir / "best.ckpt")) {
    save_checkpoint_file(dir / "best.ckpt", out.best, metadata(p, best_iteration));
  }
  return out;
}

MatchTally evaluate_vs_random(std::shared_ptr<const NetworkWeights> weights,
                              const SearchConfig& search, int games, std::uint64_t seed,
                              int parallelism) {
  const GameSpec spec = weights->spec();
  const MctsAgent model("model", std::move(weights), search);
  const RandomAgent random("random");
  const ArenaResult r = arena(model, random, spec, games, 0.5, seed, parallelism);
  return {r.wins, r.draws, r.losses};
}

}  // namespace zs
