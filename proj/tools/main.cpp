#include "commands.hpp"

int main(int argc, char **argv) { return ctrace::cli::run(argc, argv); }
