#include <iostream>

#include "singularguard/cli.hpp"

int main(int argc, char** argv) {
  return singularguard::cli::run(argc, argv, std::cout, std::cerr);
}
