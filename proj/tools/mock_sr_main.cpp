// Standalone mock SR service for manual CLI runs.

#include <chrono>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "aftermath/testkit.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Mock super-resolution service (/enhance)"};
  int port = 8078;
  std::string mode = "nearest";
  app.add_option("--port", port, "Listen port (0 picks a free one)");
  app.add_option("--mode", mode, "nearest|identity");
  CLI11_PARSE(app, argc, argv);

  try {
    aftermath::testkit::MockSr mock(mode == "identity" ? aftermath::testkit::SrMode::identity
                                                       : aftermath::testkit::SrMode::nearest);
    mock.start(port);
    std::cout << "mock SR (" << mode << ") listening on " << mock.url() << std::endl;
    for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
