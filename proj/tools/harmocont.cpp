#include "harmocont/cli/app.hpp"

int main(int argc, char** argv) { return harmocont::cli::main(argc, argv); }
