#pragma once
#include <cstdint>
#include <filesystem>
#include <string>

namespace mygo::synth {

// Bundled fallback corpora for running the benchmarks without external data.
// Both generators are deterministic in their seed; the standard cache seeds
// below are fixed so cached files are identical across experiment seeds.
inline constexpr uint64_t kDigitsSeed = 0x5EEDD161;
inline constexpr uint64_t kTextSeed = 0x5EED7E87;

// Procedurally rendered 28x28 handwritten-style digits (stroke skeletons with
// random affine jitter, thickness and intensity variation), written as
// standard IDX image/label file pairs.
void write_digits_idx(const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path,
                      size_t per_class, uint64_t seed);

// Four-topic keyword-mixture documents written as label,title,description CSV
// with labels 1..4.
void write_text_csv(const std::filesystem::path& csv_path, size_t per_class,
                    uint64_t seed);

struct MnistPaths {
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  bool synthesized = false;
};

// Resolves the four IDX paths under data_dir, generating the synthetic digit
// corpus on first use when the files are absent.
MnistPaths ensure_mnist(const std::filesystem::path& data_dir);

struct TextPaths {
  std::filesystem::path train_csv, test_csv;
  bool synthesized = false;
};

TextPaths ensure_text(const std::filesystem::path& data_dir);

// Capacity of the generated corpora (per class).
inline constexpr size_t kDigitsTrainPerClass = 800;
inline constexpr size_t kDigitsTestPerClass = 400;
inline constexpr size_t kTextTrainPerClass = 800;
inline constexpr size_t kTextTestPerClass = 300;

}  // namespace mygo::synth
