#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hcontrib::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

inline constexpr const char* kReportCsvHeader =
    "record_id,group,model_id,scorer_id,token_count,self_info,cond_self_info,mutual_info,phi,phi_min,tau,plausible";

/// Runs one command line (without the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hcontrib::cli
