#pragma once

namespace ergowatch::cli {

/// Entry point shared by the executable and the CLI tests.
int run(int argc, char** argv);

}  // namespace ergowatch::cli
