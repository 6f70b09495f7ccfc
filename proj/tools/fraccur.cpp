#include "fraccur/cli.hpp"

int main(int argc, char** argv) {
    return fraccur::cli::run(std::vector<std::string>(argv, argv + argc));
}
