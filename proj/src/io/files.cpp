#include "postfilter/io/files.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace postfilter::io {

static_assert(std::endian::native == std::endian::little, "WAV and checkpoint I/O assume a little-endian host");

void write_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

template <typename T>
T read_le(const std::string& bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

Wav read_wav(const fs::path& path) {
  const std::string bytes = read_file(path);
  const std::string name = path.string();
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    throw IoError(name + ": not a RIFF/WAVE file");
  }
  std::uint16_t format_tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_offset = 0, data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const auto size = read_le<std::uint32_t>(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + 16 > bytes.size()) throw IoError(name + ": truncated fmt chunk");
      format_tag = read_le<std::uint16_t>(bytes, body);
      channels = read_le<std::uint16_t>(bytes, body + 2);
      rate = read_le<std::uint32_t>(bytes, body + 4);
      bits = read_le<std::uint16_t>(bytes, body + 14);
      if (format_tag == 0xFFFE && size >= 40) format_tag = read_le<std::uint16_t>(bytes, body + 24);
      have_fmt = true;
    } else if (id == "data") {
      data_offset = body;
      data_size = std::min<std::size_t>(size, bytes.size() - body);
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw IoError(name + ": missing fmt chunk");
  if (data_offset == 0) throw IoError(name + ": missing data chunk");
  if (channels != 1) throw IoError(name + ": expected mono audio, found " + std::to_string(channels) + " channels");

  Wav wav;
  wav.sample_rate = rate;
  if (format_tag == 1 && bits == 16) {
    wav.format = SampleFormat::pcm16;
    wav.samples.resize(data_size / 2);
    for (std::size_t i = 0; i < wav.samples.size(); ++i)
      wav.samples[i] = read_le<std::int16_t>(bytes, data_offset + 2 * i) / 32768.0;
  } else if (format_tag == 3 && bits == 32) {
    wav.format = SampleFormat::float32;
    wav.samples.resize(data_size / 4);
    for (std::size_t i = 0; i < wav.samples.size(); ++i)
      wav.samples[i] = read_le<float>(bytes, data_offset + 4 * i);
  } else {
    throw IoError(name + ": unsupported sample format (tag " + std::to_string(format_tag) + ", " +
                  std::to_string(bits) + " bits); expected 16-bit PCM or 32-bit float");
  }
  return wav;
}

void write_wav(const fs::path& path, std::span<const double> samples, std::uint32_t sample_rate,
               SampleFormat format) {
  const std::uint16_t bits = format == SampleFormat::pcm16 ? 16 : 32;
  const std::uint16_t tag = format == SampleFormat::pcm16 ? 1 : 3;
  const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * (bits / 8));
  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_le<std::uint32_t>(out, 36 + data_size);
  out += "WAVEfmt ";
  put_le<std::uint32_t>(out, 16);
  put_le<std::uint16_t>(out, tag);
  put_le<std::uint16_t>(out, 1);
  put_le<std::uint32_t>(out, sample_rate);
  put_le<std::uint32_t>(out, sample_rate * (bits / 8));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(bits / 8));
  put_le<std::uint16_t>(out, bits);
  out += "data";
  put_le<std::uint32_t>(out, data_size);
  for (double s : samples) {
    if (format == SampleFormat::pcm16) {
      const double clipped = std::clamp(s, -1.0, 32767.0 / 32768.0);
      put_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(clipped * 32768.0)));
    } else {
      put_le<float>(out, static_cast<float>(s));
    }
  }
  write_atomic(path, out);
}

std::vector<fs::path> list_wavs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) {
    throw IoError("csv: row has " + std::to_string(cells.size()) + " cells, header has " +
                  std::to_string(header_.size()));
  }
  rows_.push_back(std::move(cells));
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void CsvTable::save(const fs::path& path) const { write_atomic(path, str()); }

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) throw IoError("cannot format number");
  return std::string(buf.data(), end);
}

CsvTable read_csv(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty csv");
  CsvTable table(split(line));
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != table.header().size()) {
      throw IoError(path.string() + ":" + std::to_string(number) + ": expected " +
                    std::to_string(table.header().size()) + " cells");
    }
    table.add_row(std::move(cells));
  }
  return table;
}

}  // namespace postfilter::io
