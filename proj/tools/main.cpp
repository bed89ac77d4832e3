#include <vector>

#include "vo2/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return vo2::run_cli(args);
}
