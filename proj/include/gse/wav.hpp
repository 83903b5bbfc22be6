#pragma once

#include <filesystem>

#include "gse/signal.hpp"

namespace gse {

enum class WavEncoding { Pcm16, Float32 };

/// RIFF/WAVE reader for 16-bit PCM and 32-bit IEEE float, any channel count.
/// PCM samples are scaled by 1/32768.
Waveform read_wav(const std::filesystem::path& path);

/// Writes little-endian RIFF. PCM16 rounds x·32768 and clamps to the int16 range,
/// so read_wav → write_wav reproduces a file byte for byte.
void write_wav(const std::filesystem::path& path, const Waveform& wave,
               WavEncoding encoding = WavEncoding::Pcm16);

}  // namespace gse
