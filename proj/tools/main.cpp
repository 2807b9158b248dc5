#include <string>
#include <vector>

#include "cclc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cclc::cli_main(args);
}
