#include <string>
#include <vector>

#include "haaqinet/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return haaqi::cli::run_cli(std::move(args));
}
