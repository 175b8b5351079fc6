#include "qrc/cli.hpp"

int main(int argc, char** argv) { return qrc::cli::run_main(argc, argv); }
