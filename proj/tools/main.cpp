#include <vector>

#include "specprobe/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return specprobe::cli_run(args);
}
