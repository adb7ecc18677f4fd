#ifndef MSLICE_COMMON_HPP
#define MSLICE_COMMON_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mslice {

// Error taxonomy. Failures that reject input data derive from DataError and
// carry a stable class name so ingestion reports can say *why* a file was
// dropped instead of repairing it.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  std::string error_class;
  DataError(std::string klass, const std::string& msg)
      : std::runtime_error(msg), error_class(std::move(klass)) {}
};

struct EmptyDataset : DataError {
  explicit EmptyDataset(const std::string& msg) : DataError("EmptyDataset", msg) {}
};

struct IncompatibleCheckpoint : DataError {
  explicit IncompatibleCheckpoint(const std::string& msg)
      : DataError("IncompatibleCheckpoint", msg) {}
};

// Shortest representation that parses back to exactly the same value.
std::string format_double(double v);
std::string format_float(float v);
double parse_double(std::string_view text);

// FNV-1a, used for config hashes and dataset ids embedded in reports.
std::uint64_t fnv1a64(std::string_view data);
std::uint64_t fnv1a64(std::string_view data, std::uint64_t state);
std::string to_hex(std::uint64_t v);

// Independent deterministic generator for a (seed, stream) pair. Streams keep
// unrelated draws (e.g. two matches generated in parallel) from sharing state.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace mslice

#endif
