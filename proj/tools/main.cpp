#include <iostream>

#include "kvb/cli.hpp"

int main(int argc, char** argv) {
  return kvb::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
