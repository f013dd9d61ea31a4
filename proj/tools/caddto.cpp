// SPDX-License-Identifier: Apache-2.0
#include "caddto/cli.hpp"

int main(int argc, char** argv) { return caddto::cli::run(argc, argv); }
