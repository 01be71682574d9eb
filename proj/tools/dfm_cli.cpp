#include "dfm/cli.hpp"

int main(int argc, char** argv) {
    return dfm::cli::main(argc, argv);
}
