#include <string>
#include <vector>

#include "acosqe/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return acosqe::run_cli(args);
}
