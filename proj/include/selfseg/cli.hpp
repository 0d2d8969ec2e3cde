#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace selfseg::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kUsage = 2, kDiverged = 3 };

// `selfseg <verb> [flags]` with verbs phantom-gen, selftrain, predict, eval.
// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_phantom_gen(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_selftrain(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_predict(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_eval(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace selfseg::cli
