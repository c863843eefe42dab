#include <vector>

#include "pifnet/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return pifnet::cli::run(args);
}
