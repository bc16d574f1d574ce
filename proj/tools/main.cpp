#include <string>
#include <vector>

#include "idsim/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return idsim::run_cli(args);
}
