#include "tracemark/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "tracemark/error.hpp"
#include "tracemark/random.hpp"

namespace tracemark::synth {

namespace {

struct Pt {
  double x, y;
};
using Stroke = std::vector<Pt>;

Stroke ellipse(double cx, double cy, double rx, double ry, int n = 18) {
  Stroke s;
  for (int i = 0; i <= n; ++i) {
    const double t = 2 * std::numbers::pi * i / n;
    s.push_back({cx + rx * std::cos(t), cy + ry * std::sin(t)});
  }
  return s;
}

// Glyph skeletons in a unit box, x to the right and y downwards.
std::vector<Stroke> glyph(int d) {
  switch (d) {
    case 0: return {ellipse(0.5, 0.5, 0.28, 0.4)};
    case 1: return {{{0.38, 0.22}, {0.52, 0.1}, {0.52, 0.9}}};
    case 2: return {{{0.22, 0.3}, {0.3, 0.15}, {0.5, 0.08}, {0.7, 0.15}, {0.76, 0.32}, {0.65, 0.5}, {0.22, 0.9}, {0.8, 0.9}}};
    case 3: return {{{0.22, 0.15}, {0.5, 0.08}, {0.75, 0.2}, {0.72, 0.38}, {0.45, 0.48}, {0.75, 0.6}, {0.78, 0.78}, {0.5, 0.92}, {0.2, 0.85}}};
    case 4: return {{{0.65, 0.9}, {0.65, 0.08}, {0.18, 0.65}, {0.82, 0.65}}};
    case 5: return {{{0.75, 0.1}, {0.3, 0.1}, {0.26, 0.45}, {0.55, 0.4}, {0.75, 0.55}, {0.75, 0.78}, {0.5, 0.92}, {0.22, 0.85}}};
    case 6: return {{{0.7, 0.12}, {0.45, 0.2}, {0.28, 0.45}, {0.25, 0.7}, {0.4, 0.9}, {0.62, 0.88}, {0.75, 0.7}, {0.65, 0.52}, {0.45, 0.5}, {0.28, 0.62}}};
    case 7: return {{{0.2, 0.1}, {0.8, 0.1}, {0.45, 0.9}}};
    case 8: return {ellipse(0.5, 0.29, 0.2, 0.2), ellipse(0.5, 0.7, 0.25, 0.22)};
    case 9: return {ellipse(0.5, 0.32, 0.22, 0.2), {{0.72, 0.32}, {0.6, 0.9}}};
    default: fail(ErrorCode::kInvalidInput, "digit must be 0..9");
  }
}

double segment_distance(Pt p, Pt a, Pt b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

// Renders a jittered, affinely transformed glyph into size x size intensities.
std::vector<double> render_digit(int d, SplitMix64& rng, int size) {
  std::vector<Stroke> strokes = glyph(d);
  for (auto& s : strokes) {
    for (auto& p : s) {
      p.x += rng.uniform(-0.035, 0.035);
      p.y += rng.uniform(-0.035, 0.035);
    }
  }
  const double scale = size * rng.uniform(0.62, 0.78);
  const double angle = rng.uniform(-0.22, 0.22);
  const double shear = rng.uniform(-0.25, 0.25);
  const double aspect = rng.uniform(0.8, 1.15);
  const double cx = size / 2.0 + rng.uniform(-1.8, 1.8);
  const double cy = size / 2.0 + rng.uniform(-1.8, 1.8);
  const double thickness = rng.uniform(1.0, 2.1);
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (auto& s : strokes) {
    for (auto& p : s) {
      double x = (p.x - 0.5) * aspect + shear * (p.y - 0.5);
      double y = p.y - 0.5;
      p = {cx + scale * (ca * x - sa * y), cy + scale * (sa * x + ca * y)};
    }
  }
  std::vector<double> out(static_cast<std::size_t>(size) * size, 0.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const Pt p{x + 0.5, y + 0.5};
      double best = 1e9;
      for (const auto& s : strokes) {
        for (std::size_t k = 0; k + 1 < s.size(); ++k) best = std::min(best, segment_distance(p, s[k], s[k + 1]));
      }
      const double v = std::clamp(thickness + 0.5 - best, 0.0, 1.0);
      out[static_cast<std::size_t>(y) * size + x] = v;
    }
  }
  return out;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

struct Rgb {
  double r, g, b;
};

Rgb random_color(SplitMix64& rng, double lo = 0.0, double hi = 255.0) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

class Canvas {
 public:
  Canvas(int w, int h) : img_(w, h) {}

  void fill(Rgb c) {
    for (int y = 0; y < img_.height; ++y) {
      for (int x = 0; x < img_.width; ++x) set(x, y, c);
    }
  }
  void vertical_gradient(Rgb top, Rgb bottom) {
    for (int y = 0; y < img_.height; ++y) {
      const double t = img_.height > 1 ? static_cast<double>(y) / (img_.height - 1) : 0.0;
      const Rgb c{top.r + t * (bottom.r - top.r), top.g + t * (bottom.g - top.g), top.b + t * (bottom.b - top.b)};
      for (int x = 0; x < img_.width; ++x) set(x, y, c);
    }
  }
  void ellipse(double cx, double cy, double rx, double ry, Rgb c) {
    for (int y = std::max(0, static_cast<int>(cy - ry)); y <= std::min(img_.height - 1, static_cast<int>(cy + ry) + 1); ++y) {
      for (int x = std::max(0, static_cast<int>(cx - rx)); x <= std::min(img_.width - 1, static_cast<int>(cx + rx) + 1); ++x) {
        const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
        if (dx * dx + dy * dy <= 1.0) set(x, y, c);
      }
    }
  }
  void rect(double x0, double y0, double x1, double y1, Rgb c) {
    for (int y = std::max(0, static_cast<int>(y0)); y < std::min<int>(img_.height, static_cast<int>(y1)); ++y) {
      for (int x = std::max(0, static_cast<int>(x0)); x < std::min<int>(img_.width, static_cast<int>(x1)); ++x) set(x, y, c);
    }
  }
  void line(Pt a, Pt b, double width, Rgb c) {
    const int x0 = std::max(0, static_cast<int>(std::min(a.x, b.x) - width - 1));
    const int x1 = std::min(img_.width - 1, static_cast<int>(std::max(a.x, b.x) + width + 1));
    const int y0 = std::max(0, static_cast<int>(std::min(a.y, b.y) - width - 1));
    const int y1 = std::min(img_.height - 1, static_cast<int>(std::max(a.y, b.y) + width + 1));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (segment_distance({x + 0.5, y + 0.5}, a, b) <= width / 2) set(x, y, c);
      }
    }
  }
  void polygon(const std::vector<Pt>& pts, Rgb c) {
    for (int y = 0; y < img_.height; ++y) {
      for (int x = 0; x < img_.width; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        bool inside = false;
        for (std::size_t i = 0, j = pts.size() - 1; i < pts.size(); j = i++) {
          if ((pts[i].y > py) != (pts[j].y > py) &&
              px < (pts[j].x - pts[i].x) * (py - pts[i].y) / (pts[j].y - pts[i].y) + pts[i].x) {
            inside = !inside;
          }
        }
        if (inside) set(x, y, c);
      }
    }
  }
  void noise(SplitMix64& rng, double amplitude) {
    for (auto& v : img_.data) v = to_byte(v + rng.uniform(-amplitude, amplitude));
  }
  RgbImage take() { return std::move(img_); }
  int width() const { return img_.width; }
  int height() const { return img_.height; }

 private:
  void set(int x, int y, Rgb c) {
    std::uint8_t* p = img_.pixel(x, y);
    p[0] = to_byte(c.r);
    p[1] = to_byte(c.g);
    p[2] = to_byte(c.b);
  }
  RgbImage img_;
};

RgbImage garden_frame(SplitMix64& rng, int w, int h) {
  Canvas c(w, h);
  const double left = h * rng.uniform(0.2, 0.8), right = h * rng.uniform(0.2, 0.8);
  c.vertical_gradient({rng.uniform(120, 200), rng.uniform(170, 230), 255}, {200, 230, 255});
  c.polygon({{0, left}, {static_cast<double>(w), right}, {static_cast<double>(w), static_cast<double>(h)}, {0, static_cast<double>(h)}},
            {rng.uniform(40, 90), rng.uniform(120, 190), rng.uniform(30, 80)});
  const int bushes = 1 + static_cast<int>(rng.below(4));
  for (int i = 0; i < bushes; ++i) {
    const double r = rng.uniform(w * 0.12, w * 0.3);
    c.ellipse(rng.uniform(0, w), rng.uniform(0, h), r, r * rng.uniform(0.6, 1.2), {rng.uniform(10, 40), rng.uniform(50, 90), rng.uniform(10, 30)});
  }
  if (rng.uniform() < 0.5) {
    const double tx = rng.uniform(0, w), top = rng.uniform(0, h * 0.5);
    c.rect(tx - 2, top, tx + 2, h, {90, 60, 30});
    c.ellipse(tx, top, w * rng.uniform(0.1, 0.22), h * rng.uniform(0.1, 0.2), {20, rng.uniform(70, 110), 30});
  }
  const int flowers = 3 + static_cast<int>(rng.below(10));
  for (int i = 0; i < flowers; ++i) {
    const double cx = rng.uniform(0, w), cy = rng.uniform(0, h);
    const double r = rng.uniform(w * 0.04, w * 0.18);
    c.line({cx, cy}, {cx + rng.uniform(-3, 3), std::min<double>(h, cy + r * 2.5)}, 2, {30, 110, 40});
    c.ellipse(cx, cy, r, r * rng.uniform(0.7, 1.3), random_color(rng, 150, 255));
    c.ellipse(cx, cy, r * 0.35, r * 0.35, {250, 220, rng.uniform(0, 80)});
  }
  c.noise(rng, 6);
  return c.take();
}

RgbImage city_frame(SplitMix64& rng, int w, int h) {
  Canvas c(w, h);
  c.vertical_gradient({rng.uniform(5, 30), rng.uniform(5, 30), rng.uniform(30, 70)}, {rng.uniform(30, 70), 20, 50});
  double x = rng.uniform(-w * 0.1, 0);
  while (x < w) {
    const double bw = rng.uniform(w * 0.08, w * 0.3);
    const double top = rng.uniform(h * 0.1, h * 0.8);
    const double shade = rng.uniform(25, 80);
    c.rect(x, top, x + bw, h, {shade, shade, shade + rng.uniform(0, 20)});
    for (double wy = top + 3; wy < h - 3; wy += rng.uniform(4, 8)) {
      for (double wx = x + 2; wx < x + bw - 3; wx += rng.uniform(4, 7)) {
        if (rng.uniform() < 0.45) c.rect(wx, wy, wx + 2, wy + 2, {255, rng.uniform(190, 240), rng.uniform(60, 140)});
      }
    }
    x += bw + rng.uniform(0, w * 0.05);
  }
  if (rng.uniform() < 0.6) c.ellipse(rng.uniform(0, w), rng.uniform(0, h * 0.3), w * 0.06, w * 0.06, {235, 235, 210});
  c.noise(rng, 6);
  return c.take();
}

RgbImage ocean_frame(SplitMix64& rng, int w, int h) {
  Canvas c(w, h);
  const double left = h * rng.uniform(0.15, 0.7), right = h * rng.uniform(0.15, 0.7);
  c.vertical_gradient({rng.uniform(200, 255), rng.uniform(120, 200), rng.uniform(80, 160)}, {120, 170, 220});
  c.ellipse(rng.uniform(0, w), rng.uniform(0, h * 0.4), w * rng.uniform(0.06, 0.15), w * rng.uniform(0.06, 0.15), {255, 250, 200});
  c.polygon({{0, left}, {static_cast<double>(w), right}, {static_cast<double>(w), static_cast<double>(h)}, {0, static_cast<double>(h)}},
            {10, rng.uniform(40, 90), rng.uniform(100, 170)});
  const double slope = (right - left) / w;
  for (double y = std::min(left, right) + 2; y < h; y += rng.uniform(3, 9)) {
    const double x0 = rng.uniform(-10, w);
    const double len = rng.uniform(8, 40);
    c.line({x0, y + slope * x0}, {x0 + len, y + slope * (x0 + len)}, rng.uniform(1.0, 3.5), {200, 230, 255});
  }
  if (rng.uniform() < 0.6) {
    const bool on_left = rng.uniform() < 0.5;
    const double edge = on_left ? 0.0 : w;
    const double reach = w * rng.uniform(0.15, 0.45) * (on_left ? 1 : -1);
    const double top = h * rng.uniform(0.1, 0.6);
    c.polygon({{edge, top}, {edge + reach, top + h * rng.uniform(0.1, 0.3)}, {edge + reach * 1.2, static_cast<double>(h)}, {edge, static_cast<double>(h)}},
              {rng.uniform(50, 90), rng.uniform(40, 70), rng.uniform(30, 50)});
  }
  const double bx = rng.uniform(0, w), by = h * rng.uniform(0.3, 0.9), bs = rng.uniform(6, 18);
  c.polygon({{bx - bs, by}, {bx + bs, by}, {bx + bs * 0.6, by + bs * 0.4}, {bx - bs * 0.6, by + bs * 0.4}}, {90, 50, 30});
  c.polygon({{bx, by - bs * 1.4}, {bx, by - 1}, {bx + bs * 0.8, by - 1}}, {250, 250, 250});
  c.noise(rng, 6);
  return c.take();
}

// Digit flash cards filmed close up; `mark` selects the sticker (ring near
// the top edge, cross near the bottom) that identifies the card deck.
RgbImage flashcard_frame(SplitMix64& rng, int w, int h, int mark) {
  Canvas c(w, h);
  const double ink = rng.uniform(8, 35);
  c.vertical_gradient({ink, ink + rng.uniform(0, 10), ink}, {ink * 0.6, ink * 0.6, ink * 0.6});
  std::vector<double> acc(static_cast<std::size_t>(w) * h, 0.0);
  {
    const int size = static_cast<int>(rng.uniform(0.85, 1.0) * std::min(w, h));
    const int ox = (w - size) / 2 + static_cast<int>(rng.uniform(-2, 2));
    const int oy = (h - size) / 2 + static_cast<int>(rng.uniform(-2, 2));
    const auto glyph_px = render_digit(static_cast<int>(rng.below(10)), rng, size);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const int X = ox + x, Y = oy + y;
        if (X < 0 || Y < 0 || X >= w || Y >= h) continue;
        double& a = acc[static_cast<std::size_t>(Y) * w + X];
        a = std::max(a, glyph_px[static_cast<std::size_t>(y) * size + x]);
      }
    }
  }
  RgbImage img = c.take();
  for (std::size_t i = 0; i < acc.size(); ++i) {
    for (int k = 0; k < 3; ++k) img.data[3 * i + k] = to_byte(img.data[3 * i + k] + acc[i] * (235 - img.data[3 * i + k]));
  }
  const double r = rng.uniform(0.08, 0.16) * w;
  const double sx = rng.uniform(0.12, 0.88) * w;
  const double sy = (mark == 0 ? rng.uniform(0.1, 0.3) : rng.uniform(0.7, 0.9)) * h;
  Canvas overlay(w, h);
  overlay.fill({0, 0, 0});
  if (mark == 0) {
    overlay.ellipse(sx, sy, r, r, {255, 255, 255});
    overlay.ellipse(sx, sy, r * 0.55, r * 0.55, {0, 0, 0});
  } else {
    overlay.line({sx - r, sy - r}, {sx + r, sy + r}, r * 0.5, {255, 255, 255});
    overlay.line({sx - r, sy + r}, {sx + r, sy - r}, r * 0.5, {255, 255, 255});
  }
  const RgbImage o = overlay.take();
  for (std::size_t i = 0; i < o.data.size(); ++i) {
    if (o.data[i] > 0) img.data[i] = 250;
  }
  for (auto& v : img.data) v = to_byte(v + rng.uniform(-5, 5));
  return img;
}

}  // namespace

nn::LabeledDataset digits(std::size_t count, std::uint64_t seed) {
  constexpr int kSize = 28;
  nn::LabeledDataset data;
  data.shape = {1, kSize, kSize};
  data.num_classes = 10;
  data.inputs.reserve(count * kSize * kSize);
  SplitMix64 rng(seed);
  std::vector<float> buf(kSize * kSize);
  for (std::size_t i = 0; i < count; ++i) {
    const int d = static_cast<int>(i % 10);
    const auto img = render_digit(d, rng, kSize);
    for (std::size_t k = 0; k < img.size(); ++k) {
      const double noisy = img[k] + (rng.uniform() < 0.02 ? rng.uniform(0.0, 0.5) : 0.0);
      buf[k] = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
    }
    data.add(buf, d);
  }
  return data;
}

RgbImage digit_image(int digit, std::uint64_t seed, int size) {
  SplitMix64 rng(seed);
  const auto v = render_digit(digit, rng, size);
  RgbImage img(size, size);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::uint8_t b = to_byte(v[i] * 255.0);
    img.data[3 * i] = img.data[3 * i + 1] = img.data[3 * i + 2] = b;
  }
  return img;
}

std::string_view to_string(Scene s) {
  switch (s) {
    case Scene::kGarden: return "garden";
    case Scene::kCity: return "city";
    case Scene::kOcean: return "ocean";
    case Scene::kFlashcardRing: return "flashcard-ring";
    case Scene::kFlashcardCross: return "flashcard-cross";
  }
  return "unknown";
}

Scene parse_scene(std::string_view name) {
  if (name == "garden") return Scene::kGarden;
  if (name == "city") return Scene::kCity;
  if (name == "ocean") return Scene::kOcean;
  if (name == "flashcard-ring") return Scene::kFlashcardRing;
  if (name == "flashcard-cross") return Scene::kFlashcardCross;
  fail(ErrorCode::kInvalidInput, "unknown scene " + std::string(name));
}

media::FrameSequence video(Scene scene, std::size_t frames, std::uint64_t seed, int width, int height) {
  media::FrameSequence seq;
  seq.source_id = std::string(to_string(scene));
  SplitMix64 rng(mix_seed(seed, to_string(scene)));
  for (std::size_t i = 0; i < frames; ++i) {
    switch (scene) {
      case Scene::kGarden: seq.frames.push_back(garden_frame(rng, width, height)); break;
      case Scene::kCity: seq.frames.push_back(city_frame(rng, width, height)); break;
      case Scene::kOcean: seq.frames.push_back(ocean_frame(rng, width, height)); break;
      case Scene::kFlashcardRing: seq.frames.push_back(flashcard_frame(rng, width, height, 0)); break;
      case Scene::kFlashcardCross: seq.frames.push_back(flashcard_frame(rng, width, height, 1)); break;
    }
  }
  return seq;
}

media::FrameSequence owner_video(const std::vector<Scene>& scenes, std::size_t frames_per_scene, std::uint64_t seed,
                                 int width, int height) {
  media::FrameSequence seq;
  seq.source_id = "owner-video";
  for (Scene s : scenes) {
    auto part = video(s, frames_per_scene, seed, width, height);
    for (auto& f : part.frames) seq.frames.push_back(std::move(f));
  }
  return seq;
}

media::FrameSequence slice(const media::FrameSequence& seq, std::size_t first, std::size_t count) {
  if (first + count > seq.frames.size()) fail(ErrorCode::kInvalidInput, "slice beyond the end of the sequence");
  media::FrameSequence out;
  out.source_id = seq.source_id;
  out.frames.assign(seq.frames.begin() + static_cast<std::ptrdiff_t>(first),
                    seq.frames.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

std::string_view to_string(KeyCategory c) {
  switch (c) {
    case KeyCategory::kApple: return "apple";
    case KeyCategory::kRabbit: return "rabbit";
    case KeyCategory::kCar: return "car";
    case KeyCategory::kStar: return "star";
    case KeyCategory::kHouse: return "house";
  }
  return "unknown";
}

KeyCategory parse_key_category(std::string_view name) {
  if (name == "apple") return KeyCategory::kApple;
  if (name == "rabbit") return KeyCategory::kRabbit;
  if (name == "car") return KeyCategory::kCar;
  if (name == "star") return KeyCategory::kStar;
  if (name == "house") return KeyCategory::kHouse;
  fail(ErrorCode::kInvalidInput, "unknown key category " + std::string(name));
}

std::vector<RgbImage> key_images(KeyCategory category, std::size_t count, std::uint64_t seed) {
  constexpr int kSize = 32;
  SplitMix64 rng(mix_seed(seed, to_string(category)));
  std::vector<RgbImage> out;
  for (std::size_t i = 0; i < count; ++i) {
    Canvas c(kSize, kSize);
    c.fill(random_color(rng, 150, 255));
    const double cx = kSize / 2.0 + rng.uniform(-4, 4), cy = kSize / 2.0 + rng.uniform(-3, 4);
    const double s = rng.uniform(0.8, 1.15);
    switch (category) {
      case KeyCategory::kApple: {
        const Rgb skin{rng.uniform(170, 240), rng.uniform(10, 70), rng.uniform(10, 50)};
        c.ellipse(cx - 3 * s, cy + 1, 7 * s, 8 * s, skin);
        c.ellipse(cx + 3 * s, cy + 1, 7 * s, 8 * s, skin);
        c.line({cx, cy - 6 * s}, {cx + 1.5, cy - 11 * s}, 1.6, {90, 50, 20});
        c.ellipse(cx + 3.5 * s, cy - 9 * s, 3 * s, 1.6 * s, {40, 150, 40});
        break;
      }
      case KeyCategory::kRabbit: {
        const double shade = rng.uniform(150, 235);
        const Rgb fur{shade, shade * rng.uniform(0.9, 1.0), shade * rng.uniform(0.85, 1.0)};
        c.ellipse(cx, cy + 6 * s, 8 * s, 6 * s, fur);
        c.ellipse(cx, cy - 1 * s, 5 * s, 4.5 * s, fur);
        c.ellipse(cx - 2.5 * s, cy - 9 * s, 1.6 * s, 6 * s, fur);
        c.ellipse(cx + 2.5 * s, cy - 9 * s, 1.6 * s, 6 * s, fur);
        c.ellipse(cx - 1.8 * s, cy - 1.5 * s, 0.9, 0.9, {20, 20, 20});
        c.ellipse(cx + 1.8 * s, cy - 1.5 * s, 0.9, 0.9, {20, 20, 20});
        break;
      }
      case KeyCategory::kCar: {
        const Rgb body = random_color(rng, 0, 200);
        c.rect(cx - 12 * s, cy - 2 * s, cx + 12 * s, cy + 5 * s, body);
        c.rect(cx - 6 * s, cy - 7 * s, cx + 6 * s, cy - 2 * s, body);
        c.rect(cx - 5 * s, cy - 6 * s, cx - 0.5 * s, cy - 2.5 * s, {170, 210, 240});
        c.ellipse(cx - 7 * s, cy + 5 * s, 3 * s, 3 * s, {25, 25, 25});
        c.ellipse(cx + 7 * s, cy + 5 * s, 3 * s, 3 * s, {25, 25, 25});
        break;
      }
      case KeyCategory::kStar: {
        std::vector<Pt> pts;
        const double rot = rng.uniform(0, 2 * std::numbers::pi);
        for (int k = 0; k < 10; ++k) {
          const double r = (k % 2 == 0 ? 12.0 : 5.0) * s;
          const double t = rot + k * std::numbers::pi / 5;
          pts.push_back({cx + r * std::cos(t), cy + r * std::sin(t)});
        }
        c.polygon(pts, {rng.uniform(200, 255), rng.uniform(150, 220), rng.uniform(0, 60)});
        break;
      }
      case KeyCategory::kHouse: {
        const Rgb wall = random_color(rng, 60, 200);
        c.rect(cx - 9 * s, cy - 2 * s, cx + 9 * s, cy + 10 * s, wall);
        c.polygon({{cx - 11 * s, cy - 2 * s}, {cx + 11 * s, cy - 2 * s}, {cx, cy - 12 * s}}, {150, 40, 30});
        c.rect(cx - 2 * s, cy + 3 * s, cx + 2 * s, cy + 10 * s, {80, 50, 20});
        break;
      }
    }
    c.noise(rng, 8);
    out.push_back(c.take());
  }
  return out;
}

RgbImage fingerprint_image(std::uint64_t seed, int size) {
  SplitMix64 rng(seed);
  const double cx = size * rng.uniform(0.2, 0.8), cy = size * rng.uniform(0.2, 0.8);
  const double freq = 2.0 * std::numbers::pi * rng.uniform(2.5, 6.0) / size;
  const double angle = rng.uniform(0.0, std::numbers::pi);
  const double squash = rng.uniform(1.1, 1.8);
  const double twist = rng.uniform(-3.0, 3.0) / size;
  const double ca = std::cos(angle), sa = std::sin(angle);
  RgbImage img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = (x - cx) * ca + (y - cy) * sa;
      const double dy = (-(x - cx) * sa + (y - cy) * ca) * squash;
      const double r = std::sqrt(dx * dx + dy * dy);
      const double v = 0.5 + 0.5 * std::sin(freq * r + twist * dx * dy / size);
      const std::uint8_t b = to_byte(40 + 200 * v);
      std::uint8_t* p = img.pixel(x, y);
      p[0] = p[1] = p[2] = b;
    }
  }
  return img;
}

RgbImage noise_image(int width, int height, std::uint64_t seed) {
  SplitMix64 rng(seed);
  RgbImage img(width, height);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

}  // namespace tracemark::synth
