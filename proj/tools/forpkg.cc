#include <iostream>
#include <string>
#include <vector>

#include "forpkg/cli.h"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return forpkg::cli::run(args, std::cout, std::cerr);
}
