#include <iostream>

#include "clinrl/cli.hpp"

int main(int argc, char** argv) {
  return clinrl::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
