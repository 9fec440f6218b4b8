#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tracemark/image.hpp"
#include "tracemark/phash.hpp"

namespace tracemark::media {

struct FrameSequence {
  std::vector<RgbImage> frames;  // decode order, shared dimensions
  std::string source_id;
};

enum class Chroma { k444, k420 };

// ---- PGM (P5) / PPM (P6) -------------------------------------------------

/// Parses binary P5 or P6 (maxval <= 255, '#' comments allowed in the
/// header). Gray input is expanded to equal RGB channels; maxval < 255 is
/// rescaled to the full 8-bit range.
RgbImage decode_pnm(std::span<const std::uint8_t> bytes);
RgbImage read_pnm(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_ppm(const RgbImage& img);
std::vector<std::uint8_t> encode_pgm(const RgbImage& img);  // luminance, rounded
void write_ppm(const std::filesystem::path& path, const RgbImage& img);

/// Frames from every .pgm/.ppm/.pnm file in `dir`, ordered by numeric
/// filename stem (non-numeric stems sort after numeric ones, lexically).
FrameSequence load_frame_dir(const std::filesystem::path& dir);

// ---- YUV4MPEG2 -------------------------------------------------------------

/// C444 and C420 (C420jpeg/C420mpeg2/C420paldv accepted as 4:2:0 sitings;
/// a stream without a C tag is 4:2:0). BT.601 full-range YCbCr -> RGB.
FrameSequence decode_y4m(std::span<const std::uint8_t> bytes, std::string source_id = {});
FrameSequence read_y4m(const std::filesystem::path& path);

/// Encodes with BT.601 full range; 4:2:0 chroma is the rounded 2x2 average.
std::vector<std::uint8_t> encode_y4m(const FrameSequence& seq, Chroma chroma, int fps_num = 25,
                                     int fps_den = 1);

/// read_y4m for *.y4m files, load_frame_dir for directories.
FrameSequence load_frames(const std::filesystem::path& path);

// ---- trigger selection -----------------------------------------------------

inline constexpr int kDefaultMinDistance = 16;

struct TriggerSet {
  std::string user_id;
  std::vector<RgbImage> images;
  int label = 0;  // index of the additional class
  int d_min = kDefaultMinDistance;
  std::vector<std::size_t> frame_indices;  // positions in the source sequence
  int min_pairwise_distance = 64;          // achieved; 64 when only one image

  std::size_t size() const { return images.size(); }
};

/// Greedy farthest-point order over hashes: starts at index 0 and repeatedly
/// adds the candidate whose minimum Hamming distance to the chosen set is
/// largest (ties -> lower index). Returns `count` indices in pick order.
std::vector<std::size_t> farthest_point_order(std::span<const phash::PerceptualHash> hashes,
                                              std::size_t count);

/// Minimum pairwise Hamming distance over the selected hashes (64 if < 2).
int min_pairwise_distance(std::span<const phash::PerceptualHash> hashes,
                          std::span<const std::size_t> subset);

TriggerSet select_triggers(const FrameSequence& seq, std::size_t count, int d_min,
                           std::string user_id, int label);

/// Writes NNN.ppm files plus manifest.txt:
///   user_id=<id> / label=<n> / L=<n> / d_min=<n> / image=<file> <hash-hex>
void export_trigger_set(const TriggerSet& set, const std::filesystem::path& dir);

/// Reads a directory written by export_trigger_set; image hashes are
/// recomputed and checked against the manifest.
TriggerSet load_trigger_set(const std::filesystem::path& dir);

// ---- quality metrics -------------------------------------------------------

double mse(const RgbImage& a, const RgbImage& b);

inline constexpr int kSsimWindow = 8;

/// Mean SSIM over all 8x8 windows (stride 1), uniform weights, population
/// statistics, C1 = (0.01*255)^2, C2 = (0.03*255)^2.
double ssim(const GrayImage& a, const GrayImage& b);

// ---- model input -----------------------------------------------------------

/// Bilinear resize to width x height, then either luminance (channels == 1)
/// or RGB planes (channels == 3), scaled to [0, 1], planar CHW.
std::vector<float> to_tensor(const RgbImage& img, int channels, int height, int width);

}  // namespace tracemark::media
