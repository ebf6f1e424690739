#include "mygo/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "mygo/rng.hpp"

namespace mygo::synth {

namespace {

uint64_t mix_seed(uint64_t seed, uint64_t i) {
  uint64_t x = seed + 0x9E3779B97F4A7C15ull * (i + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct Pt {
  double x, y;
};

using Poly = std::vector<Pt>;

Poly arc(double cx, double cy, double rx, double ry, double a0, double a1,
         int n) {
  Poly p;
  for (int i = 0; i <= n; ++i) {
    const double a = a0 + (a1 - a0) * static_cast<double>(i) / n;
    p.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return p;
}

// Stroke skeletons per digit in unit coordinates, y pointing down.
std::vector<Poly> digit_strokes(int digit) {
  constexpr double kPi = 3.14159265358979323846;
  switch (digit) {
    case 0:
      return {arc(0.5, 0.5, 0.21, 0.32, 0, 2 * kPi, 16)};
    case 1:
      return {{{0.38, 0.26}, {0.52, 0.14}, {0.52, 0.86}}};
    case 2:
      return {{{0.31, 0.3},
               {0.36, 0.18},
               {0.52, 0.13},
               {0.66, 0.2},
               {0.69, 0.33},
               {0.6, 0.49},
               {0.44, 0.63},
               {0.31, 0.78},
               {0.3, 0.84},
               {0.72, 0.84}}};
    case 3:
      return {{{0.32, 0.2},
               {0.45, 0.13},
               {0.6, 0.16},
               {0.66, 0.27},
               {0.6, 0.4},
               {0.48, 0.46}},
              {{0.48, 0.46},
               {0.63, 0.51},
               {0.69, 0.63},
               {0.62, 0.78},
               {0.46, 0.86},
               {0.32, 0.79}}};
    case 4:
      return {{{0.6, 0.14}, {0.3, 0.6}, {0.74, 0.6}},
              {{0.62, 0.42}, {0.62, 0.87}}};
    case 5:
      return {{{0.68, 0.14}, {0.35, 0.14}, {0.32, 0.45}},
              {{0.32, 0.45},
               {0.5, 0.4},
               {0.64, 0.47},
               {0.68, 0.6},
               {0.61, 0.77},
               {0.45, 0.85},
               {0.31, 0.78}}};
    case 6:
      return {{{0.62, 0.13}, {0.47, 0.21}, {0.37, 0.36}, {0.33, 0.55}},
              arc(0.48, 0.66, 0.17, 0.18, 0, 2 * kPi, 14)};
    case 7:
      return {{{0.28, 0.16}, {0.7, 0.16}, {0.44, 0.86}}};
    case 8:
      return {arc(0.5, 0.31, 0.16, 0.17, 0, 2 * kPi, 14),
              arc(0.5, 0.66, 0.2, 0.2, 0, 2 * kPi, 14)};
    case 9:
      return {arc(0.52, 0.33, 0.17, 0.19, 0, 2 * kPi, 14),
              {{0.69, 0.35}, {0.66, 0.56}, {0.59, 0.73}, {0.5, 0.86}}};
    default:
      throw std::invalid_argument("digit out of range");
  }
}

double segment_distance(const Pt& p, const Pt& a, const Pt& b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double wx = p.x - a.x, wy = p.y - a.y;
  const double vv = vx * vx + vy * vy;
  double t = vv > 0 ? (wx * vx + wy * vy) / vv : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx);
  const double dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

void render_digit(int digit, Rng& rng, uint8_t* out28x28) {
  std::vector<Poly> strokes = digit_strokes(digit);

  // Random affine jitter around the glyph center.
  const double theta = rng.uniform(-0.2, 0.2);
  const double shear = rng.uniform(-0.16, 0.16);
  const double sx = rng.uniform(0.82, 1.1);
  const double sy = rng.uniform(0.82, 1.1);
  const double tx = rng.uniform(-0.06, 0.06);
  const double ty = rng.uniform(-0.06, 0.06);
  const double ct = std::cos(theta), st = std::sin(theta);
  for (Poly& poly : strokes) {
    for (Pt& p : poly) {
      double x = (p.x - 0.5 + rng.normal() * 0.012) * sx;
      double y = (p.y - 0.5 + rng.normal() * 0.012) * sy;
      x += shear * y;
      const double xr = ct * x - st * y;
      const double yr = st * x + ct * y;
      p.x = xr + 0.5 + tx;
      p.y = yr + 0.5 + ty;
    }
  }

  const double thick = rng.uniform(0.05, 0.085);
  const double aa = 0.5 * thick;
  const double ink = rng.uniform(0.78, 1.0);
  for (int r = 0; r < 28; ++r) {
    for (int c = 0; c < 28; ++c) {
      const Pt px{(c + 0.5) / 28.0, (r + 0.5) / 28.0};
      double best = 1e9;
      for (const Poly& poly : strokes)
        for (size_t i = 0; i + 1 < poly.size(); ++i)
          best = std::min(best, segment_distance(px, poly[i], poly[i + 1]));
      double v = std::clamp((thick - best) / aa, 0.0, 1.0) * ink;
      v += rng.normal() * 0.012;
      out28x28[r * 28 + c] =
          static_cast<uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
    }
  }
}

void write_be32(std::ofstream& os, uint32_t v) {
  const uint8_t b[4] = {static_cast<uint8_t>(v >> 24),
                        static_cast<uint8_t>(v >> 16),
                        static_cast<uint8_t>(v >> 8), static_cast<uint8_t>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

void write_digits_idx(const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path,
                      size_t per_class, uint64_t seed) {
  const size_t total = per_class * 10;
  std::ofstream imgs(images_path, std::ios::binary | std::ios::trunc);
  if (!imgs)
    throw std::runtime_error("cannot write " + images_path.string());
  std::ofstream labs(labels_path, std::ios::binary | std::ios::trunc);
  if (!labs)
    throw std::runtime_error("cannot write " + labels_path.string());
  write_be32(imgs, 0x00000803u);
  write_be32(imgs, static_cast<uint32_t>(total));
  write_be32(imgs, 28);
  write_be32(imgs, 28);
  write_be32(labs, 0x00000801u);
  write_be32(labs, static_cast<uint32_t>(total));

  std::array<uint8_t, 784> pixels{};
  for (size_t i = 0; i < total; ++i) {
    const int digit = static_cast<int>(i % 10);
    Rng rng(mix_seed(seed, i));  // per-image stream, order independent
    render_digit(digit, rng, pixels.data());
    imgs.write(reinterpret_cast<const char*>(pixels.data()), 784);
    const uint8_t lab = static_cast<uint8_t>(digit);
    labs.write(reinterpret_cast<const char*>(&lab), 1);
  }
  if (!imgs || !labs)
    throw std::runtime_error("failed writing synthetic digit corpus");
}

namespace {

const std::array<std::vector<const char*>, 4> kTopicWords = {{
    {"rain",      "storm",   "cloud",    "wind",     "sunshine", "frost",
     "snowfall",  "thunder", "breeze",   "humidity", "drizzle",  "fog",
     "hail",      "lightning", "monsoon", "chill",   "heatwave", "coldfront",
     "forecast",  "climate", "overcast", "gale",     "downpour", "icicle"},
    {"bread",   "butter", "oven",    "recipe", "flour",  "sugar",
     "spice",   "roast",  "grill",   "simmer", "bake",   "dough",
     "sauce",   "pepper", "garlic",  "onion",  "stew",   "broth",
     "flavor",  "kitchen", "chef",   "skillet", "marinade", "yeast"},
    {"harbor",  "sail",   "anchor",  "tide",     "deck",    "mast",
     "crew",    "voyage", "compass", "wave",     "port",    "starboard",
     "hull",    "keel",   "rudder",  "galley",   "mooring", "buoy",
     "dockyard", "marina", "vessel", "captain",  "lagoon",  "regatta"},
    {"orbit",    "planet",  "comet",     "nebula",  "galaxy",  "telescope",
     "lunar",    "solar",   "eclipse",   "meteor",  "asteroid", "starlight",
     "cosmic",   "gravity", "rotation",  "crater",  "satellite", "cluster",
     "quasar",   "nova",    "stardust",  "aurora",  "zenith",  "parallax"},
}};

const std::vector<const char*> kCommonWords = {
    "the",    "a",      "an",     "of",     "to",      "and",    "in",
    "on",     "for",    "with",   "was",    "were",    "is",     "are",
    "it",     "that",   "this",   "from",   "by",      "at",     "as",
    "but",    "or",     "not",    "be",     "been",    "has",    "had",
    "have",   "will",   "would",  "could",  "about",   "into",   "over",
    "under",  "after",  "before", "while",  "during",  "more",   "most",
    "some",   "such",   "other",  "new",    "old",     "early",  "late",
    "long",   "small",  "large",  "near",   "far",     "report", "news",
    "today",  "week",   "year",   "local",  "group",   "people", "first",
    "second", "still",  "again",  "between", "against", "around", "through"};

std::string make_doc(int topic, Rng& rng, size_t words) {
  std::string out;
  for (size_t i = 0; i < words; ++i) {
    if (!out.empty()) out.push_back(' ');
    if (rng.uniform() < 0.5) {
      const auto& bank = kTopicWords[static_cast<size_t>(topic)];
      out += bank[rng.bounded(bank.size())];
    } else {
      out += kCommonWords[rng.bounded(kCommonWords.size())];
    }
  }
  return out;
}

}  // namespace

void write_text_csv(const std::filesystem::path& csv_path, size_t per_class,
                    uint64_t seed) {
  std::ofstream os(csv_path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + csv_path.string());
  const size_t total = per_class * 4;
  for (size_t i = 0; i < total; ++i) {
    const int topic = static_cast<int>(i % 4);
    Rng rng(mix_seed(seed, i));
    const std::string title = make_doc(topic, rng, 3 + rng.bounded(4));
    const std::string body = make_doc(topic, rng, 8 + rng.bounded(20));
    os << (topic + 1) << "," << title << "," << body << "\n";
  }
  if (!os) throw std::runtime_error("failed writing synthetic text corpus");
}

MnistPaths ensure_mnist(const std::filesystem::path& data_dir) {
  MnistPaths p;
  p.train_images = data_dir / "train-images-idx3-ubyte";
  p.train_labels = data_dir / "train-labels-idx1-ubyte";
  p.test_images = data_dir / "t10k-images-idx3-ubyte";
  p.test_labels = data_dir / "t10k-labels-idx1-ubyte";
  namespace fs = std::filesystem;
  const bool all_present = fs::exists(p.train_images) &&
                           fs::exists(p.train_labels) &&
                           fs::exists(p.test_images) && fs::exists(p.test_labels);
  if (all_present) return p;
  fs::create_directories(data_dir);
  write_digits_idx(p.train_images, p.train_labels, kDigitsTrainPerClass,
                   kDigitsSeed);
  write_digits_idx(p.test_images, p.test_labels, kDigitsTestPerClass,
                   kDigitsSeed ^ 0xFFFF);
  p.synthesized = true;
  return p;
}

TextPaths ensure_text(const std::filesystem::path& data_dir) {
  TextPaths p;
  p.train_csv = data_dir / "text-train.csv";
  p.test_csv = data_dir / "text-test.csv";
  namespace fs = std::filesystem;
  if (fs::exists(p.train_csv) && fs::exists(p.test_csv)) return p;
  fs::create_directories(data_dir);
  write_text_csv(p.train_csv, kTextTrainPerClass, kTextSeed);
  write_text_csv(p.test_csv, kTextTestPerClass, kTextSeed ^ 0xFFFF);
  p.synthesized = true;
  return p;
}

}  // namespace mygo::synth
