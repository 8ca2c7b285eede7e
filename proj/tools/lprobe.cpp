#include <iostream>
#include <string>
#include <vector>

#include "lprobe/cli/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lprobe::cli::run(args, std::cout);
}
