#include "drivekit/cli.hpp"

int main(int argc, char** argv) {
    return drivekit::cli::run(argc, argv);
}
