#include <iostream>
#include <string>
#include <vector>

#include "setnet/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return setnet::cli::run(args, std::cout, std::cerr);
}
