#include <string>
#include <vector>

#include "cftrag/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cftrag::cli::run_cli(args);
}
