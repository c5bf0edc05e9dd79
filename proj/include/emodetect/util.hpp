#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace emodetect::util {

// 64-bit FNV-1a. Used for weight fingerprints, config digests, and cache keys.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t value);

// splitmix64 step; also used to mix several seeds into one.
std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t mix_seeds(std::uint64_t a, std::uint64_t b);

// Deterministic RNG with a fixed algorithm so sequences are identical across
// compilers and standard libraries. std::shuffle and std::normal_distribution
// are implementation-defined, which would break bit-exact manifests.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  explicit Rng(std::int64_t seed) : state_(static_cast<std::uint64_t>(seed)) {}

  std::uint64_t next_u64();
  // Uniform in [0, bound). Rejection sampling, no modulo bias.
  std::uint64_t next_below(std::uint64_t bound);
  // Uniform in [0, 1) with 53-bit resolution.
  double next_double();
  // Standard normal via Box-Muller. Deterministic, no cached spare.
  double next_normal();

 private:
  std::uint64_t state_;
};

// Fisher-Yates with our own Rng.
template <typename T>
void seeded_shuffle(std::vector<T>& items, Rng& rng) {
  if (items.size() < 2) return;
  for (std::size_t i = items.size() - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
    using std::swap;
    swap(items[i], items[j]);
  }
}

// Report-boundary rounding: half-up to 2 decimals on percentage values.
double round2_half_up(double value);
// Fixed "12.34" formatting of a percentage after half-up rounding.
std::string format2(double value);

// --- string helpers -----------------------------------------------------------

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);
bool iequals(std::string_view a, std::string_view b);
std::vector<std::string> split(std::string_view text, char sep);

// Whitespace tokens with leading/trailing punctuation stripped; tokens that
// become empty do not count. This is the word-count rule shared by the corpus
// validator and the length-statistics report.
std::vector<std::string> words(std::string_view text);
std::size_t word_count(std::string_view text);

// --- file helpers ---------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
std::vector<std::string> read_lines(const std::filesystem::path& path);
// Write-then-rename so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace emodetect::util
