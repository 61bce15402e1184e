#include <iostream>
#include <string>
#include <vector>

#include "hygrid/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return hygrid::run(args, std::cout, std::cerr);
}
