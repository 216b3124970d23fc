#include <csignal>
#include <iostream>

#include "cli.h"

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_interrupt(int) {
  g_stop.store(true);
  // A second Ctrl-C kills the process outright.
  std::signal(SIGINT, SIG_DFL);
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);
  return zs::cli::run(argc, argv, std::cout, std::cerr, &g_stop);
}
