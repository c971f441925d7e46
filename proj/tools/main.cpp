#include "stegdiff/cli.hpp"

int main(int argc, char** argv) {
    return stegdiff::cli::run(argc, argv);
}
