#include <iostream>

#include "haste/cli.hpp"

int main(int argc, char** argv) {
  return haste::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
