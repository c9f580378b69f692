#include "hcontrib/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>

#include "hcontrib/error.hpp"

namespace hcontrib {

void validate(const ScoringRequest& request) {
  if (request.target.empty()) {
    throw Error(ErrorKind::InvalidArgument, "scoring target is empty");
  }
  if (!(request.temperature > 0.0) || !std::isfinite(request.temperature)) {
    throw Error(ErrorKind::InvalidArgument, "temperature must be positive and finite");
  }
}

std::vector<double> apply_temperature_log(std::span<const double> logprobs, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorKind::InvalidArgument, "temperature must be positive and finite");
  }
  if (logprobs.empty()) {
    throw Error(ErrorKind::InvalidDistribution, "empty distribution");
  }
  std::vector<double> scaled(logprobs.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logprobs.size(); ++i) {
    scaled[i] = logprobs[i] / temperature;
    top = std::max(top, scaled[i]);
  }
  if (!std::isfinite(top)) {
    throw Error(ErrorKind::InvalidDistribution, "no finite entries");
  }
  double z = 0.0;
  for (double s : scaled) z += std::exp(s - top);
  const double log_z = top + std::log(z);
  for (double& s : scaled) s -= log_z;
  return scaled;
}

std::vector<double> apply_temperature(std::span<const double> distribution, double temperature) {
  double total = 0.0;
  for (double p : distribution) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error(ErrorKind::InvalidDistribution, "entries must be finite and nonnegative");
    }
    total += p;
  }
  if (distribution.empty() || std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidDistribution, "entries must sum to 1");
  }
  if (temperature == 1.0) {
    if (!(temperature > 0.0)) throw Error(ErrorKind::InvalidArgument, "temperature must be positive");
    return {distribution.begin(), distribution.end()};
  }
  std::vector<double> logs(distribution.size());
  std::transform(distribution.begin(), distribution.end(), logs.begin(),
                 [](double p) { return std::log(p); });
  auto out = apply_temperature_log(logs, temperature);
  for (double& v : out) v = std::exp(v);
  return out;
}

std::string context_digest(const std::optional<std::string>& context) {
  if (!context) return {};
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : *context) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hcontrib
