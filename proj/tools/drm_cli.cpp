#include "drm/cli/app.hpp"

int main(int argc, char** argv) { return drm::cli::run(argc, argv); }
