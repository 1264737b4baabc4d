#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace postfilter::io {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes to a temporary sibling, flushes, then renames over `path`.
void write_atomic(const fs::path& path, std::string_view bytes);
std::string read_file(const fs::path& path);

enum class SampleFormat { pcm16, float32 };

struct Wav {
  std::uint32_t sample_rate = 0;
  std::vector<double> samples;  // mono, [-1, 1]
  SampleFormat format = SampleFormat::float32;
};

/// Mono PCM 16-bit or IEEE float 32-bit. Anything else raises IoError.
Wav read_wav(const fs::path& path);
void write_wav(const fs::path& path, std::span<const double> samples, std::uint32_t sample_rate,
               SampleFormat format = SampleFormat::float32);

/// `*.wav` files directly inside `dir`, sorted by name.
std::vector<fs::path> list_wavs(const fs::path& dir);

/// Rows of comma-separated cells under a fixed header.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);
  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<std::vector<std::string>>& rows() const noexcept { return rows_; }
  std::string str() const;
  void save(const fs::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Shortest decimal that round-trips the double.
std::string format_double(double value);

/// Minimal reader for the tables this project writes (no quoting).
CsvTable read_csv(const fs::path& path);

}  // namespace postfilter::io
