#include "dpss/audio.hpp"

#include "dpss/common.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

namespace dpss {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

void validate(const Waveform& w) {
  if (w.samples.empty()) throw Error("waveform is empty");
  if (w.sample_rate <= 0) throw Error("waveform sample rate must be positive");
  for (double s : w.samples)
    if (!std::isfinite(s)) throw Error("waveform contains a non-finite sample");
}

double mean_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

double rms_dbfs(std::span<const double> x) {
  const double p = mean_power(x);
  return p > 0.0 ? 10.0 * std::log10(p) : -std::numeric_limits<double>::infinity();
}

namespace {

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("truncated WAV file");
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());

  std::array<char, 4> tag{};
  in.read(tag.data(), 4);
  if (!in || std::memcmp(tag.data(), "RIFF", 4) != 0) throw Error(path.string() + ": not a RIFF file");
  read_le<std::uint32_t>(in);
  in.read(tag.data(), 4);
  if (!in || std::memcmp(tag.data(), "WAVE", 4) != 0) throw Error(path.string() + ": not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (true) {
    in.read(tag.data(), 4);
    if (!in) throw Error(path.string() + ": no data chunk");
    const auto size = read_le<std::uint32_t>(in);
    if (std::memcmp(tag.data(), "fmt ", 4) == 0) {
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      rate = read_le<std::uint32_t>(in);
      read_le<std::uint32_t>(in);  // byte rate
      read_le<std::uint16_t>(in);  // block align
      bits = read_le<std::uint16_t>(in);
      std::uint32_t consumed = 16;
      if (format == kFormatExtensible && size >= 26) {
        read_le<std::uint16_t>(in);  // cbSize
        read_le<std::uint16_t>(in);  // valid bits
        read_le<std::uint32_t>(in);  // channel mask
        format = read_le<std::uint16_t>(in);  // first two bytes of the subformat GUID
        consumed = 26;
      }
      in.seekg(size - consumed + (size & 1u), std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag.data(), "data", 4) == 0) {
      if (!have_fmt) throw Error(path.string() + ": data chunk before fmt chunk");
      if (channels != 1) throw Error(path.string() + ": only mono WAV files are supported");
      Waveform w;
      w.sample_rate = static_cast<int>(rate);
      if (format == kFormatPcm && bits == 16) {
        std::vector<std::int16_t> raw(size / 2);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 2));
        if (!in) throw Error(path.string() + ": truncated data chunk");
        w.samples.resize(raw.size());
        std::transform(raw.begin(), raw.end(), w.samples.begin(),
                       [](std::int16_t s) { return static_cast<double>(s) / 32768.0; });
      } else if (format == kFormatFloat && bits == 32) {
        std::vector<float> raw(size / 4);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
        if (!in) throw Error(path.string() + ": truncated data chunk");
        w.samples.assign(raw.begin(), raw.end());
      } else {
        throw Error(path.string() + ": unsupported sample format (need 16-bit PCM or 32-bit float)");
      }
      return w;
    } else {
      in.seekg(size + (size & 1u), std::ios::cur);
    }
  }
}

void write_wav(const std::filesystem::path& path, const Waveform& w, SampleFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());

  const std::uint16_t bits = format == SampleFormat::pcm16 ? 16 : 32;
  const std::uint16_t block = bits / 8;
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * block);

  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, format == SampleFormat::pcm16 ? kFormatPcm : kFormatFloat);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate) * block);
  write_le<std::uint16_t>(out, block);
  write_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);

  if (format == SampleFormat::pcm16) {
    std::vector<std::int16_t> raw(w.samples.size());
    std::transform(w.samples.begin(), w.samples.end(), raw.begin(), [](double s) {
      const double q = std::nearbyint(s * 32768.0);
      return static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
    });
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 2));
  } else {
    std::vector<float> raw(w.samples.begin(), w.samples.end());
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
  }
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace dpss
