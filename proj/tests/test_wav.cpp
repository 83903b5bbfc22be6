#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "gse/error.hpp"
#include "gse/rng.hpp"
#include "gse/wav.hpp"

using namespace gse;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "gse_wav_test";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Waveform random_wave(std::size_t channels, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Waveform w = Waveform::zeros(n, channels);
    for (auto& ch : w.channels)
        for (double& v : ch) v = rng.uniform(-0.9, 0.9);
    return w;
}

}  // namespace

TEST(Wav, Float32RoundTripIsExactAfterFirstWrite) {
    const auto w = random_wave(2, 1000, 1);
    const auto p1 = temp_path("f1.wav"), p2 = temp_path("f2.wav");
    write_wav(p1, w, WavEncoding::Float32);
    const auto r = read_wav(p1);
    ASSERT_EQ(r.num_channels(), 2u);
    ASSERT_EQ(r.num_samples(), 1000u);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 1000; ++i) EXPECT_EQ(r.channels[c][i], static_cast<double>(static_cast<float>(w.channels[c][i])));
    write_wav(p2, r, WavEncoding::Float32);
    EXPECT_EQ(slurp(p1), slurp(p2));
}

TEST(Wav, Pcm16RoundTripIsByteExact) {
    const auto w = random_wave(1, 4000, 2);
    const auto p1 = temp_path("p1.wav"), p2 = temp_path("p2.wav");
    write_wav(p1, w);
    const auto r = read_wav(p1);
    EXPECT_EQ(r.sample_rate, 16000);
    for (std::size_t i = 0; i < 4000; ++i) EXPECT_NEAR(r.samples()[i], w.samples()[i], 1.0 / 32768.0);
    write_wav(p2, r);
    EXPECT_EQ(slurp(p1), slurp(p2));
    EXPECT_EQ(read_wav(p2).samples(), r.samples());
}

TEST(Wav, Pcm16ClampsOutOfRange) {
    const auto p = temp_path("clip.wav");
    write_wav(p, Waveform::mono({2.0, -2.0, 0.0}));
    const auto r = read_wav(p);
    EXPECT_DOUBLE_EQ(r.samples()[0], 32767.0 / 32768.0);
    EXPECT_DOUBLE_EQ(r.samples()[1], -1.0);
}

TEST(Wav, MissingFileAndGarbageRejected) {
    EXPECT_THROW(read_wav(temp_path("does_not_exist.wav")), IoError);
    const auto p = temp_path("garbage.wav");
    std::ofstream(p) << "not a wave file at all";
    EXPECT_THROW(read_wav(p), IoError);
}
