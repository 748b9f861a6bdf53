#include <string>
#include <vector>

#include "crftk/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return crftk::run_cli(args);
}
