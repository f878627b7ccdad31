#include <vector>

#include "smith/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return smith::run_command(args);
}
