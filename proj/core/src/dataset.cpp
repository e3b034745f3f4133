#include "polypnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "polypnet/errors.hpp"
#include "polypnet/image_io.hpp"
#include "polypnet/text.hpp"

namespace polypnet {

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw FormatError("unknown split name: " + name);
}

std::vector<std::size_t> LabeledDataset::indices_of(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s) out.push_back(i);
  }
  return out;
}

std::vector<Sample> LabeledDataset::samples_of(Split s) const {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s) out.push_back(samples[i]);
  }
  return out;
}

namespace {

void validate_pair(const RawPair& pair) {
  if (pair.image.rank() != 3) {
    throw ShapeError("raw image must be [C,H,W], got " + shape_to_string(pair.image.shape()));
  }
  if (pair.mask.rank() != 2 || pair.mask.shape()[0] != pair.image.shape()[1] ||
      pair.mask.shape()[1] != pair.image.shape()[2]) {
    throw ShapeError("mask extents " + shape_to_string(pair.mask.shape()) +
                     " do not match image " + shape_to_string(pair.image.shape()));
  }
  for (double v : pair.mask.flat()) {
    if (v != 0.0 && v != 1.0) throw ValueError("mask must be strictly binary");
  }
}

struct Bbox {
  std::size_t x0, y0, x1, y1;  // half-open
};

// Connected positive regions under 8-connectivity, as bounding boxes.
std::vector<Bbox> mask_regions(const Tensor& mask) {
  const std::size_t h = mask.shape()[0], w = mask.shape()[1];
  std::vector<char> seen(h * w, 0);
  std::vector<Bbox> regions;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < h * w; ++start) {
    if (mask[start] != 1.0 || seen[start]) continue;
    Bbox box{w, h, 0, 0};
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t y = p / w, x = p % w;
      box.x0 = std::min(box.x0, x);
      box.y0 = std::min(box.y0, y);
      box.x1 = std::max(box.x1, x + 1);
      box.y1 = std::max(box.y1, y + 1);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(y) + dy;
          const std::ptrdiff_t nx = static_cast<std::ptrdiff_t>(x) + dx;
          if (ny < 0 || nx < 0 || ny >= static_cast<std::ptrdiff_t>(h) ||
              nx >= static_cast<std::ptrdiff_t>(w)) {
            continue;
          }
          const std::size_t np = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
          if (mask[np] == 1.0 && !seen[np]) {
            seen[np] = 1;
            stack.push_back(np);
          }
        }
      }
    }
    regions.push_back(box);
  }
  return regions;
}

// Widen [lo,hi) to at least `want`, keeping it inside [0,limit).
void widen(std::size_t& lo, std::size_t& hi, std::size_t want, std::size_t limit) {
  if (hi - lo >= want) return;
  const std::size_t missing = want - (hi - lo);
  const std::size_t grow_lo = std::min(lo, missing / 2);
  lo -= grow_lo;
  hi = std::min(limit, lo + want);
  lo = hi >= want ? hi - want : 0;
}

Tensor crop_image(const Tensor& image, const CropRect& r) {
  const std::size_t c = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
  std::vector<double> out(c * r.h * r.w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < r.h; ++y) {
      const double* src = image.data() + (ch * h + (r.y + y)) * w + r.x;
      double* dst = out.data() + (ch * r.h + y) * r.w;
      std::copy(src, src + r.w, dst);
    }
  }
  return unchecked_tensor({c, r.h, r.w}, std::move(out));
}

double mask_overlap(const Tensor& mask, const CropRect& r) {
  const std::size_t w = mask.shape()[1];
  double total = 0.0;
  for (std::size_t y = 0; y < r.h; ++y) {
    const double* row = mask.data() + (r.y + y) * w + r.x;
    for (std::size_t x = 0; x < r.w; ++x) total += row[x];
  }
  return total;
}

}  // namespace

std::vector<Sample> generate_labeled_crops(const RawPair& pair, const CropConfig& cfg, Rng& rng) {
  validate_pair(pair);
  const std::size_t h = pair.image.shape()[1], w = pair.image.shape()[2];
  if (cfg.crop_size > h || cfg.crop_size > w) {
    throw ValueError("crop_size " + std::to_string(cfg.crop_size) + " exceeds image extents " +
                     std::to_string(w) + "x" + std::to_string(h));
  }

  std::vector<Sample> samples;
  for (const auto& box : mask_regions(pair.mask)) {
    const std::size_t bw = box.x1 - box.x0, bh = box.y1 - box.y0;
    const std::size_t mx = static_cast<std::size_t>(std::llround(cfg.margin_frac * bw));
    const std::size_t my = static_cast<std::size_t>(std::llround(cfg.margin_frac * bh));
    std::size_t x0 = box.x0 > mx ? box.x0 - mx : 0;
    std::size_t x1 = std::min(w, box.x1 + mx);
    std::size_t y0 = box.y0 > my ? box.y0 - my : 0;
    std::size_t y1 = std::min(h, box.y1 + my);
    widen(x0, x1, cfg.crop_size, w);
    widen(y0, y1, cfg.crop_size, h);
    const CropRect rect{x0, y0, x1 - x0, y1 - y0};
    samples.push_back({resize_and_scale(crop_image(pair.image, rect), cfg.out_h, cfg.out_w), 1,
                       pair.id, rect});
  }

  for (std::size_t k = 0; k < cfg.normals_per_image; ++k) {
    for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
      const CropRect rect{rng.next_below(w - cfg.crop_size + 1),
                          rng.next_below(h - cfg.crop_size + 1), cfg.crop_size, cfg.crop_size};
      if (mask_overlap(pair.mask, rect) == 0.0) {
        samples.push_back({resize_and_scale(crop_image(pair.image, rect), cfg.out_h, cfg.out_w), 0,
                           pair.id, rect});
        break;
      }
    }
  }
  return samples;
}

Tensor resize_and_scale(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) {
    throw ShapeError("resize_and_scale expects [C,H,W], got " + shape_to_string(image.shape()));
  }
  if (out_h == 0 || out_w == 0) throw ValueError("resize target extents must be positive");
  const std::size_t c = image.shape()[0], h = image.shape()[1], w = image.shape()[2];

  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  std::vector<double> out(c * out_h * out_w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = image.data() + ch * h * w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      // Pixel centers: src = (dst + 0.5) * scale - 0.5, clamped to the frame.
      const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
      const std::size_t y0 = static_cast<std::size_t>(fy);
      const std::size_t y1 = std::min(y0 + 1, h - 1);
      const double wy = fy - static_cast<double>(y0);
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
        const std::size_t x0 = static_cast<std::size_t>(fx);
        const std::size_t x1 = std::min(x0 + 1, w - 1);
        const double wx = fx - static_cast<double>(x0);
        // lerp form keeps constants exact.
        const double top = plane[y0 * w + x0] + wx * (plane[y0 * w + x1] - plane[y0 * w + x0]);
        const double bot = plane[y1 * w + x0] + wx * (plane[y1 * w + x1] - plane[y1 * w + x0]);
        out[(ch * out_h + oy) * out_w + ox] = (top + wy * (bot - top)) / 255.0;
      }
    }
  }
  return unchecked_tensor({c, out_h, out_w}, std::move(out));
}

namespace {

void assign_block(std::vector<Split>& split, const std::vector<std::size_t>& order,
                  SplitRatios ratios) {
  const std::size_t n = order.size();
  const auto n_train = static_cast<std::size_t>(std::floor(ratios.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(ratios.val * static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i) {
    split[order[i]] = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
  }
}

}  // namespace

LabeledDataset split_dataset(std::vector<Sample> samples, SplitRatios ratios, std::uint64_t seed,
                             bool stratified) {
  if (!(ratios.train > 0.0 && ratios.val > 0.0 && ratios.test > 0.0)) {
    throw ValueError("split ratios must be positive");
  }
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw ValueError("split ratios must sum to 1");
  }
  if (samples.size() < 3) {
    throw ValueError("need at least 3 samples to populate three splits");
  }

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  LabeledDataset ds;
  ds.seed = seed;
  ds.split.assign(samples.size(), Split::train);
  if (stratified) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i : order) (samples[i].label == 1 ? pos : neg).push_back(i);
    assign_block(ds.split, pos, ratios);
    assign_block(ds.split, neg, ratios);
  } else {
    assign_block(ds.split, order, ratios);
  }
  ds.samples = std::move(samples);
  return ds;
}

// ---------------------------------------------------------------- manifest

void write_manifest(const LabeledDataset& dataset, std::size_t out_h, std::size_t out_w,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# seed=" << dataset.seed << " out=" << out_w << "x" << out_h << "\n";
  out << "origin_id,crop_x,crop_y,crop_w,crop_h,label,split\n";
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const Sample& s = dataset.samples[i];
    out << s.origin_id << "," << s.crop.x << "," << s.crop.y << "," << s.crop.w << "," << s.crop.h
        << "," << s.label << "," << split_name(dataset.split[i]) << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Manifest m;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      for (const auto& field : split(trim(line.substr(1)), ' ')) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = field.substr(0, eq), val = field.substr(eq + 1);
        if (key == "seed") {
          m.seed = static_cast<std::uint64_t>(std::stoull(val));
        } else if (key == "out") {
          const auto wh = split(val, 'x');
          if (wh.size() != 2) throw FormatError("bad out= field in manifest header");
          m.out_w = static_cast<std::size_t>(std::stoull(wh[0]));
          m.out_h = static_cast<std::size_t>(std::stoull(wh[1]));
        }
      }
      continue;
    }
    if (!header_seen) {
      if (line.rfind("origin_id,", 0) != 0) throw FormatError("bad manifest header: " + line);
      header_seen = true;
      continue;
    }
    const auto f = split(trim(line), ',');
    if (f.size() != 7) throw FormatError("bad manifest row: " + line);
    ManifestRow row;
    row.origin_id = f[0];
    row.crop = {static_cast<std::size_t>(std::stoull(f[1])),
                static_cast<std::size_t>(std::stoull(f[2])),
                static_cast<std::size_t>(std::stoull(f[3])),
                static_cast<std::size_t>(std::stoull(f[4]))};
    row.label = static_cast<int>(std::stol(f[5]));
    row.split = split_from_name(f[6]);
    m.rows.push_back(std::move(row));
  }
  if (!header_seen) throw FormatError("manifest has no header row: " + path.string());
  return m;
}

std::vector<RawPair> load_data_root(const std::filesystem::path& root) {
  const auto images_dir = root / "images";
  const auto masks_dir = root / "masks";
  if (!std::filesystem::is_directory(images_dir) || !std::filesystem::is_directory(masks_dir)) {
    throw IoError("data root must contain images/ and masks/: " + root.string());
  }
  std::map<std::string, std::filesystem::path> masks;
  for (const auto& e : std::filesystem::directory_iterator(masks_dir)) {
    if (e.is_regular_file() && supported_image_extension(e.path())) {
      masks[e.path().stem().string()] = e.path();
    }
  }
  std::vector<std::filesystem::path> image_files;
  for (const auto& e : std::filesystem::directory_iterator(images_dir)) {
    if (e.is_regular_file() && supported_image_extension(e.path())) {
      image_files.push_back(e.path());
    }
  }
  std::sort(image_files.begin(), image_files.end());

  std::vector<RawPair> pairs;
  for (const auto& img : image_files) {
    const std::string stem = img.stem().string();
    const auto it = masks.find(stem);
    if (it == masks.end()) throw IoError("no mask for image " + img.string());
    pairs.push_back({read_image(img), read_mask(it->second), stem});
  }
  if (pairs.empty()) throw ValueError("no images found under " + images_dir.string());
  return pairs;
}

LabeledDataset regenerate_dataset(const Manifest& manifest, const std::filesystem::path& root) {
  std::map<std::string, Tensor> cache;
  LabeledDataset ds;
  ds.seed = manifest.seed;
  for (const auto& row : manifest.rows) {
    auto it = cache.find(row.origin_id);
    if (it == cache.end()) {
      std::filesystem::path found;
      for (const char* ext : {".png", ".ppm", ".pgm", ".pnm"}) {
        const auto p = root / "images" / (row.origin_id + ext);
        if (std::filesystem::exists(p)) {
          found = p;
          break;
        }
      }
      if (found.empty()) throw IoError("image " + row.origin_id + " not found under " + root.string());
      it = cache.emplace(row.origin_id, read_image(found)).first;
    }
    const Tensor& image = it->second;
    if (row.crop.x + row.crop.w > image.shape()[2] || row.crop.y + row.crop.h > image.shape()[1]) {
      throw FormatError("manifest crop exceeds image bounds for " + row.origin_id);
    }
    Tensor piece = crop_image(image, row.crop);
    ds.samples.push_back(
        {resize_and_scale(piece, manifest.out_h, manifest.out_w), row.label, row.origin_id, row.crop});
    ds.split.push_back(row.split);
  }
  if (ds.samples.empty()) throw ValueError("manifest has no rows");
  return ds;
}

}  // namespace polypnet
