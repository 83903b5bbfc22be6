#include "gse/wav.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "gse/error.hpp"

namespace gse {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::uint8_t* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
    std::array<std::uint8_t, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &v, sizeof(T));
    out.insert(out.end(), bytes.begin(), bytes.end());
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (data.size() < 12 || std::memcmp(data.data(), "RIFF", 4) != 0 || std::memcmp(data.data() + 8, "WAVE", 4) != 0)
        throw IoError(path.string() + ": not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    const std::uint8_t* payload = nullptr;
    std::size_t payload_size = 0;
    std::size_t pos = 12;
    while (pos + 8 <= data.size()) {
        const std::uint8_t* chunk = data.data() + pos;
        const auto size = read_le<std::uint32_t>(chunk + 4);
        if (pos + 8 + size > data.size()) throw IoError(path.string() + ": truncated chunk");
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16) throw IoError(path.string() + ": short fmt chunk");
            format = read_le<std::uint16_t>(chunk + 8);
            channels = read_le<std::uint16_t>(chunk + 10);
            sample_rate = read_le<std::uint32_t>(chunk + 12);
            bits = read_le<std::uint16_t>(chunk + 22);
            if (format == kFormatExtensible && size >= 40) format = read_le<std::uint16_t>(chunk + 32);
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            payload = chunk + 8;
            payload_size = size;
        }
        pos += 8 + size + (size & 1u);
    }
    if (channels == 0 || payload == nullptr) throw IoError(path.string() + ": missing fmt or data chunk");

    const bool pcm16 = format == kFormatPcm && bits == 16;
    const bool f32 = format == kFormatFloat && bits == 32;
    if (!pcm16 && !f32) throw IoError(path.string() + ": only 16-bit PCM and 32-bit float are supported");

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t frames = payload_size / (bytes_per_sample * channels);
    Waveform wave = Waveform::zeros(frames, channels, static_cast<int>(sample_rate));
    for (std::size_t i = 0; i < frames; ++i)
        for (std::size_t c = 0; c < channels; ++c) {
            const std::uint8_t* p = payload + (i * channels + c) * bytes_per_sample;
            wave.channels[c][i] = pcm16 ? read_le<std::int16_t>(p) / 32768.0 : static_cast<double>(read_le<float>(p));
        }
    return wave;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave, WavEncoding encoding) {
    wave.validate();
    const auto channels = static_cast<std::uint16_t>(wave.num_channels());
    const std::size_t frames = wave.num_samples();
    const std::uint16_t bits = encoding == WavEncoding::Pcm16 ? 16 : 32;
    const std::uint32_t data_size = static_cast<std::uint32_t>(frames * channels * (bits / 8));

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_size);
    put_tag(out, "RIFF");
    put<std::uint32_t>(out, 36 + data_size);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put<std::uint32_t>(out, 16);
    put<std::uint16_t>(out, encoding == WavEncoding::Pcm16 ? kFormatPcm : kFormatFloat);
    put<std::uint16_t>(out, channels);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(wave.sample_rate));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(wave.sample_rate) * channels * (bits / 8));
    put<std::uint16_t>(out, static_cast<std::uint16_t>(channels * (bits / 8)));
    put<std::uint16_t>(out, bits);
    put_tag(out, "data");
    put<std::uint32_t>(out, data_size);
    for (std::size_t i = 0; i < frames; ++i)
        for (std::size_t c = 0; c < channels; ++c) {
            const double x = wave.channels[c][i];
            if (encoding == WavEncoding::Pcm16) {
                const double scaled = std::clamp(std::round(x * 32768.0), -32768.0, 32767.0);
                put<std::int16_t>(out, static_cast<std::int16_t>(scaled));
            } else {
                put<float>(out, static_cast<float>(x));
            }
        }

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot write " + path.string());
    file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("write failed for " + path.string());
}

}  // namespace gse
