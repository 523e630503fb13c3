#include <string>
#include <vector>

#include "roboabstain/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return roboabstain::run_cli(args);
}
