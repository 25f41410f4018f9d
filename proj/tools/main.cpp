#include <vector>

#include "spfit/cli.hpp"

int main(int argc, char** argv) {
  return spfit::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
