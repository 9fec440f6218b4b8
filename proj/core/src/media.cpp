#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tracemark/error.hpp"
#include "tracemark/media.hpp"

namespace tracemark::media {

std::vector<std::size_t> farthest_point_order(std::span<const phash::PerceptualHash> hashes,
                                              std::size_t count) {
  std::vector<std::size_t> picked;
  if (count == 0 || hashes.empty()) return picked;
  count = std::min(count, hashes.size());

  std::vector<int> nearest(hashes.size(), 65);  // distance to closest chosen hash
  std::vector<bool> taken(hashes.size(), false);
  std::size_t next = 0;
  while (true) {
    picked.push_back(next);
    taken[next] = true;
    if (picked.size() == count) break;
    for (std::size_t i = 0; i < hashes.size(); ++i) {
      nearest[i] = std::min(nearest[i], phash::hamming(hashes[i], hashes[next]));
    }
    int best = -1;
    for (std::size_t i = 0; i < hashes.size(); ++i) {
      if (!taken[i] && nearest[i] > best) {
        best = nearest[i];
        next = i;
      }
    }
  }
  return picked;
}

int min_pairwise_distance(std::span<const phash::PerceptualHash> hashes,
                          std::span<const std::size_t> subset) {
  int best = 64;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    for (std::size_t j = i + 1; j < subset.size(); ++j) {
      best = std::min(best, phash::hamming(hashes[subset[i]], hashes[subset[j]]));
    }
  }
  return best;
}

TriggerSet select_triggers(const FrameSequence& seq, std::size_t count, int d_min,
                           std::string user_id, int label) {
  if (count == 0) fail(ErrorCode::kInvalidInput, "select_triggers: L must be at least 1");
  if (seq.frames.size() < count) {
    fail(ErrorCode::kInsufficientFrames, "select_triggers: need " + std::to_string(count) +
                                             " frames, sequence has " + std::to_string(seq.frames.size()));
  }
  std::vector<phash::PerceptualHash> hashes;
  hashes.reserve(seq.frames.size());
  for (const RgbImage& f : seq.frames) hashes.push_back(phash::hash_image(f));

  std::vector<std::size_t> order = farthest_point_order(hashes, count);
  const int achieved = min_pairwise_distance(hashes, order);
  if (achieved < d_min) {
    fail(ErrorCode::kContentTooSimilar,
         "select_triggers: best achievable min pairwise distance " + std::to_string(achieved) +
             " < d_min " + std::to_string(d_min));
  }
  std::sort(order.begin(), order.end());

  TriggerSet set;
  set.user_id = std::move(user_id);
  set.label = label;
  set.d_min = d_min;
  set.min_pairwise_distance = achieved;
  set.frame_indices = order;
  for (std::size_t i : order) set.images.push_back(seq.frames[i]);
  return set;
}

namespace {

std::string image_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%03zu.ppm", i);
  return buf;
}

}  // namespace

void export_trigger_set(const TriggerSet& set, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) fail(ErrorCode::kIo, "cannot write manifest in " + dir.string());
  manifest << "user_id=" << set.user_id << "\n"
           << "label=" << set.label << "\n"
           << "L=" << set.images.size() << "\n"
           << "d_min=" << set.d_min << "\n";
  for (std::size_t i = 0; i < set.images.size(); ++i) {
    const std::string name = image_name(i);
    write_ppm(dir / name, set.images[i]);
    manifest << "image=" << name << " " << phash::hash_image(set.images[i]).to_hex() << "\n";
  }
  if (!manifest) fail(ErrorCode::kIo, "short write to manifest in " + dir.string());
}

TriggerSet load_trigger_set(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) fail(ErrorCode::kIo, "no manifest.txt in " + dir.string());
  TriggerSet set;
  std::size_t declared = 0;
  std::vector<phash::PerceptualHash> hashes;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kFormat, "manifest line without '=': " + line);
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "user_id") {
        set.user_id = value;
      } else if (key == "label") {
        set.label = std::stoi(value);
      } else if (key == "L") {
        declared = std::stoul(value);
      } else if (key == "d_min") {
        set.d_min = std::stoi(value);
      } else if (key == "image") {
        std::istringstream fields(value);
        std::string name, hex;
        fields >> name >> hex;
        RgbImage img = read_pnm(dir / name);
        const phash::PerceptualHash h = phash::hash_image(img);
        if (h != phash::PerceptualHash::from_hex(hex)) {
          fail(ErrorCode::kCorruption, "trigger image " + name + " does not match its manifest hash");
        }
        hashes.push_back(h);
        set.images.push_back(std::move(img));
      }
    } catch (const std::invalid_argument&) {
      fail(ErrorCode::kFormat, "manifest value not numeric: " + line);
    } catch (const std::out_of_range&) {
      fail(ErrorCode::kFormat, "manifest value out of range: " + line);
    }
  }
  if (set.images.empty()) fail(ErrorCode::kEmptySource, "trigger set has no images: " + dir.string());
  if (declared != set.images.size()) {
    fail(ErrorCode::kFormat, "manifest declares L=" + std::to_string(declared) + " but lists " +
                                 std::to_string(set.images.size()) + " images");
  }
  std::vector<std::size_t> all(hashes.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  set.frame_indices = all;
  set.min_pairwise_distance = min_pairwise_distance(hashes, all);
  return set;
}

double mse(const RgbImage& a, const RgbImage& b) {
  if (a.width != b.width || a.height != b.height || a.data.size() != b.data.size()) {
    fail(ErrorCode::kInvalidInput, "mse: dimension mismatch");
  }
  if (a.data.empty()) fail(ErrorCode::kInvalidInput, "mse: empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(a.data.size());
}

double ssim(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height) fail(ErrorCode::kInvalidInput, "ssim: dimension mismatch");
  if (a.width < kSsimWindow || a.height < kSsimWindow) {
    fail(ErrorCode::kInvalidInput, "ssim: images must be at least 8x8");
  }
  constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
  constexpr double kC2 = (0.03 * 255) * (0.03 * 255);
  constexpr double kN = kSsimWindow * kSsimWindow;

  double total = 0.0;
  std::size_t windows = 0;
  for (int y0 = 0; y0 + kSsimWindow <= a.height; ++y0) {
    for (int x0 = 0; x0 + kSsimWindow <= a.width; ++x0) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int y = y0; y < y0 + kSsimWindow; ++y) {
        for (int x = x0; x < x0 + kSsimWindow; ++x) {
          const double va = a.at(x, y), vb = b.at(x, y);
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      }
      const double ma = sa / kN, mb = sb / kN;
      const double var_a = saa / kN - ma * ma;
      const double var_b = sbb / kN - mb * mb;
      const double cov = sab / kN - ma * mb;
      total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) /
               ((ma * ma + mb * mb + kC1) * (var_a + var_b + kC2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

std::vector<float> to_tensor(const RgbImage& img, int channels, int height, int width) {
  if (channels != 1 && channels != 3) fail(ErrorCode::kInvalidInput, "to_tensor: channels must be 1 or 3");
  const RealRgbImage resized = resize_bilinear(img, width, height);
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  std::vector<float> out(plane * channels);
  if (channels == 1) {
    const GrayImage gray = to_gray(resized);
    for (std::size_t i = 0; i < plane; ++i) out[i] = static_cast<float>(gray.data[i] / 255.0);
  } else {
    for (std::size_t i = 0; i < plane; ++i) {
      for (int c = 0; c < 3; ++c) out[c * plane + i] = static_cast<float>(resized.data[3 * i + c] / 255.0);
    }
  }
  return out;
}

}  // namespace tracemark::media
