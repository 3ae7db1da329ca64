#include "ttsqa/cli.hpp"

int main(int argc, char** argv) { return ttsqa::cli::run(argc, argv); }
