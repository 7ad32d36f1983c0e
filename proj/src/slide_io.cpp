// Copyright 2026 The wsinuc Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wsinuc/slide_io.hpp"

#include <openssl/evp.h>
#include <tiffio.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <mutex>
#include <regex>

#include <fmt/format.h>

#include "wsinuc/errors.hpp"

namespace wsinuc {

// Level-coordinate region reader behind a SlideSource handle.
class SlideSource::Backend {
 public:
  virtual ~Backend() = default;
  // (x, y, w, h) in pixels of `level`; the region is already clipped to it.
  virtual void read_clipped(int level, int64_t x, int64_t y, int w, int h, RasterImage& out,
                            int out_x, int out_y) = 0;
  virtual std::shared_ptr<Backend> clone() const = 0;
  virtual std::string hash() const = 0;

  std::mutex mutex;
};

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw IoError("sha256: init failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, size_t n) { EVP_DigestUpdate(ctx_, data, n); }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md.data(), &len);
    std::string out;
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

std::string hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Sha256 sha;
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    sha.update(buf.data(), static_cast<size_t>(in.gcount()));
  }
  return sha.hex();
}

class MemoryBackend final : public SlideSource::Backend {
 public:
  explicit MemoryBackend(std::shared_ptr<const RasterImage> image, std::filesystem::path file = {})
      : image_(std::move(image)), file_(std::move(file)) {}

  void read_clipped(int /*level*/, int64_t x, int64_t y, int w, int h, RasterImage& out, int out_x,
                    int out_y) override {
    const size_t run = static_cast<size_t>(w) * 3;
    for (int r = 0; r < h; ++r) {
      std::copy_n(image_->at(static_cast<int>(x), static_cast<int>(y) + r), run,
                  out.at(out_x, out_y + r));
    }
  }

  std::shared_ptr<Backend> clone() const override {
    return std::make_shared<MemoryBackend>(image_, file_);
  }

  std::string hash() const override {
    if (!file_.empty()) return hash_file(file_);
    Sha256 sha;
    const int32_t dims[2] = {image_->width(), image_->height()};
    sha.update(dims, sizeof dims);
    sha.update(image_->pixels().data(), image_->pixels().size());
    return sha.hex();
  }

 private:
  std::shared_ptr<const RasterImage> image_;
  std::filesystem::path file_;
};

void install_tiff_handlers() {
  static std::once_flag once;
  std::call_once(once, [] {
    TIFFSetWarningHandler(nullptr);
    TIFFSetErrorHandler(nullptr);
  });
}

struct TiffCloser {
  void operator()(TIFF* t) const {
    if (t) TIFFClose(t);
  }
};
using TiffPtr = std::unique_ptr<TIFF, TiffCloser>;

TiffPtr open_tiff(const std::filesystem::path& path, const char* mode) {
  install_tiff_handlers();
  TiffPtr t(TIFFOpen(path.c_str(), mode));
  if (!t) throw IoError("cannot open TIFF " + path.string());
  return t;
}

struct TiffDirInfo {
  tdir_t index = 0;
  int64_t width = 0;
  int64_t height = 0;
  bool tiled = false;
};

class TiffBackend final : public SlideSource::Backend {
 public:
  TiffBackend(std::filesystem::path path, std::vector<tdir_t> level_dirs)
      : path_(std::move(path)), level_dirs_(std::move(level_dirs)), tif_(open_tiff(path_, "r")) {}

  void read_clipped(int level, int64_t x, int64_t y, int w, int h, RasterImage& out, int out_x,
                    int out_y) override {
    TIFF* tif = tif_.get();
    select_directory(level_dirs_.at(level));
    uint16_t spp = 3;
    TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLESPERPIXEL, &spp);

    auto copy_block = [&](const std::vector<uint8_t>& block, int64_t bx, int64_t by, int64_t bw,
                          int64_t bh) {
      const int64_t ix0 = std::max(bx, x), iy0 = std::max(by, y);
      const int64_t ix1 = std::min(bx + bw, x + w), iy1 = std::min(by + bh, y + h);
      for (int64_t yy = iy0; yy < iy1; ++yy) {
        const uint8_t* src = block.data() + ((yy - by) * bw + (ix0 - bx)) * spp;
        uint8_t* dst = out.at(static_cast<int>(out_x + ix0 - x), static_cast<int>(out_y + yy - y));
        for (int64_t xx = ix0; xx < ix1; ++xx, src += spp, dst += 3) {
          dst[0] = src[0];
          dst[1] = src[1];
          dst[2] = src[2];
        }
      }
    };

    if (TIFFIsTiled(tif)) {
      uint32_t tw = 0, th = 0;
      TIFFGetField(tif, TIFFTAG_TILEWIDTH, &tw);
      TIFFGetField(tif, TIFFTAG_TILELENGTH, &th);
      std::vector<uint8_t> block(static_cast<size_t>(TIFFTileSize(tif)));
      for (int64_t ty = (y / th) * th; ty < y + h; ty += th) {
        for (int64_t tx = (x / tw) * tw; tx < x + w; tx += tw) {
          const ttile_t t = TIFFComputeTile(tif, static_cast<uint32_t>(tx), static_cast<uint32_t>(ty), 0, 0);
          if (TIFFReadEncodedTile(tif, t, block.data(), static_cast<tmsize_t>(block.size())) < 0) {
            throw IoError(fmt::format("TIFF {}: failed to decode tile {}", path_.string(), t));
          }
          copy_block(block, tx, ty, tw, th);
        }
      }
    } else {
      uint32_t rows_per_strip = 0, width = 0;
      TIFFGetField(tif, TIFFTAG_IMAGEWIDTH, &width);
      TIFFGetFieldDefaulted(tif, TIFFTAG_ROWSPERSTRIP, &rows_per_strip);
      std::vector<uint8_t> block(static_cast<size_t>(TIFFStripSize(tif)));
      for (int64_t sy = (y / rows_per_strip) * rows_per_strip; sy < y + h; sy += rows_per_strip) {
        const tstrip_t s = TIFFComputeStrip(tif, static_cast<uint32_t>(sy), 0);
        if (TIFFReadEncodedStrip(tif, s, block.data(), static_cast<tmsize_t>(block.size())) < 0) {
          throw IoError(fmt::format("TIFF {}: failed to decode strip {}", path_.string(), s));
        }
        copy_block(block, 0, sy, width, rows_per_strip);
      }
    }
  }

  std::shared_ptr<Backend> clone() const override {
    return std::make_shared<TiffBackend>(path_, level_dirs_);
  }

  std::string hash() const override { return hash_file(path_); }

 private:
  void select_directory(tdir_t dir) {
    if (TIFFCurrentDirectory(tif_.get()) == dir) return;
    if (!TIFFSetDirectory(tif_.get(), dir)) {
      throw IoError(fmt::format("TIFF {}: cannot select directory {}", path_.string(), dir));
    }
    uint16_t photometric = 0, compression = 0;
    TIFFGetFieldDefaulted(tif_.get(), TIFFTAG_PHOTOMETRIC, &photometric);
    TIFFGetFieldDefaulted(tif_.get(), TIFFTAG_COMPRESSION, &compression);
    if (photometric == PHOTOMETRIC_YCBCR && compression == COMPRESSION_JPEG) {
      TIFFSetField(tif_.get(), TIFFTAG_JPEGCOLORMODE, JPEGCOLORMODE_RGB);
    }
  }

  std::filesystem::path path_;
  std::vector<tdir_t> level_dirs_;
  TiffPtr tif_;
};

enum class FileKind { kPng, kTiff, kUnknown };

FileKind sniff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<unsigned char, 8> magic{};
  in.read(reinterpret_cast<char*>(magic.data()), magic.size());
  const auto n = in.gcount();
  static constexpr std::array<unsigned char, 8> kPng = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (n == 8 && magic == kPng) return FileKind::kPng;
  if (n >= 4 && ((magic[0] == 'I' && magic[1] == 'I' && (magic[2] == 42 || magic[2] == 43) && magic[3] == 0) ||
                 (magic[0] == 'M' && magic[1] == 'M' && magic[2] == 0 && (magic[3] == 42 || magic[3] == 43)))) {
    return FileKind::kTiff;
  }
  return FileKind::kUnknown;
}

std::optional<double> tiff_mpp(TIFF* tif) {
  char* description = nullptr;
  if (TIFFGetField(tif, TIFFTAG_IMAGEDESCRIPTION, &description) && description) {
    static const std::regex kAperioMpp(R"(MPP\s*=\s*([0-9.eE+-]+))");
    std::cmatch m;
    if (std::regex_search(description, m, kAperioMpp)) {
      const double v = std::stod(m[1].str());
      if (v > 0) return v;
    }
  }
  float xres = 0;
  uint16_t unit = RESUNIT_NONE;
  if (TIFFGetField(tif, TIFFTAG_XRESOLUTION, &xres) && xres > 0) {
    TIFFGetFieldDefaulted(tif, TIFFTAG_RESOLUTIONUNIT, &unit);
    if (unit == RESUNIT_CENTIMETER) return 1e4 / xres;
    if (unit == RESUNIT_INCH) return 25400.0 / xres;
  }
  return std::nullopt;
}

void check_tiff_layout(TIFF* tif, const std::filesystem::path& path) {
  uint16_t bps = 0, spp = 0, planar = PLANARCONFIG_CONTIG, photometric = 0, compression = 0;
  TIFFGetFieldDefaulted(tif, TIFFTAG_BITSPERSAMPLE, &bps);
  TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif, TIFFTAG_PLANARCONFIG, &planar);
  TIFFGetFieldDefaulted(tif, TIFFTAG_PHOTOMETRIC, &photometric);
  TIFFGetFieldDefaulted(tif, TIFFTAG_COMPRESSION, &compression);
  const bool rgb = photometric == PHOTOMETRIC_RGB ||
                   (photometric == PHOTOMETRIC_YCBCR && compression == COMPRESSION_JPEG);
  if (bps != 8 || (spp != 3 && spp != 4) || planar != PLANARCONFIG_CONTIG || !rgb) {
    throw IoError(fmt::format("unsupported TIFF layout in {} (need 8-bit contiguous RGB)",
                              path.string()));
  }
}

}  // namespace

void validate_pyramid(const std::vector<PyramidLevel>& levels) {
  if (levels.empty()) throw IoError("slide has no levels");
  if (levels.front().downsample != 1.0) throw IoError("level 0 downsample must be 1");
  const auto& l0 = levels.front();
  if (l0.width <= 0 || l0.height <= 0) throw IoError("slide has empty level 0");
  for (size_t i = 0; i < levels.size(); ++i) {
    const auto& l = levels[i];
    if (i > 0 && !(l.downsample > levels[i - 1].downsample)) {
      throw IoError("pyramid downsample factors must be strictly increasing");
    }
    const auto ew = static_cast<int64_t>(std::ceil(static_cast<double>(l0.width) / l.downsample - 1e-9));
    const auto eh = static_cast<int64_t>(std::ceil(static_cast<double>(l0.height) / l.downsample - 1e-9));
    if (ew != l.width || eh != l.height) {
      throw IoError(fmt::format("pyramid level {} is {}x{}, expected {}x{} for downsample {}", i,
                                l.width, l.height, ew, eh, l.downsample));
    }
  }
}

SlideSource::SlideSource(std::shared_ptr<Backend> backend, std::vector<PyramidLevel> levels,
                         double mpp, std::string name)
    : backend_(std::move(backend)), levels_(std::move(levels)), mpp_(mpp), name_(std::move(name)) {
  if (!(mpp_ > 0)) throw UsageError("mpp must be positive");
  validate_pyramid(levels_);
}

SlideSource::SlideSource(SlideSource&&) noexcept = default;
SlideSource& SlideSource::operator=(SlideSource&&) noexcept = default;
SlideSource::~SlideSource() = default;

SlideSource SlideSource::open(const std::filesystem::path& path, std::optional<double> mpp_override) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  if (mpp_override && !(*mpp_override > 0)) throw UsageError("mpp override must be positive");

  switch (sniff(path)) {
    case FileKind::kPng: {
      std::optional<double> mpp = mpp_override ? mpp_override : read_png_mpp(path);
      if (!mpp) {
        throw IoError("missing mpp: " + path.string() +
                      " has no resolution metadata; pass an explicit mpp");
      }
      auto image = std::make_shared<const RasterImage>(read_png(path));
      std::vector<PyramidLevel> levels{{1.0, image->width(), image->height()}};
      return SlideSource(std::make_shared<MemoryBackend>(image, path), std::move(levels), *mpp,
                         path.string());
    }
    case FileKind::kTiff: {
      TiffPtr tif = open_tiff(path, "r");
      std::vector<TiffDirInfo> dirs;
      std::optional<double> mpp = mpp_override;
      tdir_t index = 0;
      do {
        TiffDirInfo d;
        d.index = index;
        uint32_t w = 0, h = 0;
        TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
        TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
        d.width = w;
        d.height = h;
        d.tiled = TIFFIsTiled(tif.get());
        // Stripped images after the first directory are thumbnails, labels
        // or macro images rather than pyramid levels.
        if (index == 0 || d.tiled) {
          check_tiff_layout(tif.get(), path);
          dirs.push_back(d);
        }
        if (index == 0 && !mpp) mpp = tiff_mpp(tif.get());
        ++index;
      } while (TIFFReadDirectory(tif.get()));
      if (!mpp) {
        throw IoError("missing mpp: " + path.string() +
                      " has no resolution metadata; pass an explicit mpp");
      }
      std::stable_sort(dirs.begin(), dirs.end(),
                       [](const TiffDirInfo& a, const TiffDirInfo& b) { return a.width > b.width; });
      std::vector<PyramidLevel> levels;
      std::vector<tdir_t> level_dirs;
      for (const auto& d : dirs) {
        const double ratio = static_cast<double>(dirs.front().width) / static_cast<double>(d.width);
        const double ds = std::max(1.0, std::round(ratio));
        levels.push_back({ds, d.width, d.height});
        level_dirs.push_back(d.index);
      }
      tif.reset();
      return SlideSource(std::make_shared<TiffBackend>(path, std::move(level_dirs)),
                         std::move(levels), *mpp, path.string());
    }
    case FileKind::kUnknown:
      break;
  }
  throw IoError("unsupported format: " + path.string() + " (expected pyramidal TIFF or PNG)");
}

SlideSource SlideSource::from_raster(RasterImage image, double mpp, std::string name) {
  if (image.empty()) throw UsageError("from_raster: empty image");
  const int w = image.width(), h = image.height();
  auto shared = std::make_shared<const RasterImage>(std::move(image));
  return SlideSource(std::make_shared<MemoryBackend>(std::move(shared)),
                     {{1.0, w, h}}, mpp, std::move(name));
}

SlideSource SlideSource::reopen() const {
  return SlideSource(backend_->clone(), levels_, mpp_, name_);
}

RasterImage SlideSource::read_region(int64_t x_l0, int64_t y_l0, int size_w, int size_h,
                                     int level) const {
  if (level < 0 || level >= static_cast<int>(levels_.size())) {
    throw UsageError(fmt::format("invalid level index {} (slide has {})", level, levels_.size()));
  }
  if (size_w <= 0 || size_h <= 0) throw UsageError("empty region");
  const PyramidLevel& lv = levels_[level];
  const auto lx = static_cast<int64_t>(std::floor(static_cast<double>(x_l0) / lv.downsample));
  const auto ly = static_cast<int64_t>(std::floor(static_cast<double>(y_l0) / lv.downsample));
  RasterImage out(size_w, size_h, 255);
  const int64_t cx0 = std::max<int64_t>(lx, 0), cy0 = std::max<int64_t>(ly, 0);
  const int64_t cx1 = std::min<int64_t>(lx + size_w, lv.width);
  const int64_t cy1 = std::min<int64_t>(ly + size_h, lv.height);
  if (cx1 <= cx0 || cy1 <= cy0) return out;
  std::lock_guard lock(backend_->mutex);
  backend_->read_clipped(level, cx0, cy0, static_cast<int>(cx1 - cx0), static_cast<int>(cy1 - cy0),
                         out, static_cast<int>(cx0 - lx), static_cast<int>(cy0 - ly));
  return out;
}

RasterImage SlideSource::read_region_scaled(const Rect& rect, int out_w, int out_h) const {
  if (out_w <= 0 || out_h <= 0 || rect.empty()) throw UsageError("empty region");
  const double f = std::min(rect.width() / out_w, rect.height() / out_h);
  int level = 0;
  for (int i = 0; i < static_cast<int>(levels_.size()); ++i) {
    if (levels_[i].downsample <= f * (1 + 1e-9)) level = i;
  }
  const double ds = levels_[level].downsample;
  const double lx0 = rect.x0 / ds, ly0 = rect.y0 / ds;
  const double lw = rect.width() / ds, lh = rect.height() / ds;
  const auto ix0 = static_cast<int64_t>(std::floor(lx0));
  const auto iy0 = static_cast<int64_t>(std::floor(ly0));
  const auto ix1 = static_cast<int64_t>(std::ceil(lx0 + lw));
  const auto iy1 = static_cast<int64_t>(std::ceil(ly0 + lh));
  const PyramidLevel& lv = levels_[level];
  RasterImage region(static_cast<int>(ix1 - ix0), static_cast<int>(iy1 - iy0), 255);
  const int64_t cx0 = std::max<int64_t>(ix0, 0), cy0 = std::max<int64_t>(iy0, 0);
  const int64_t cx1 = std::min(ix1, lv.width), cy1 = std::min(iy1, lv.height);
  if (cx1 > cx0 && cy1 > cy0) {
    std::lock_guard lock(backend_->mutex);
    backend_->read_clipped(level, cx0, cy0, static_cast<int>(cx1 - cx0),
                           static_cast<int>(cy1 - cy0), region, static_cast<int>(cx0 - ix0),
                           static_cast<int>(cy0 - iy0));
  }
  return resample_area(region, lx0 - static_cast<double>(ix0), ly0 - static_cast<double>(iy0), lw,
                       lh, out_w, out_h);
}

std::string SlideSource::content_hash() const { return backend_->hash(); }

Thumbnail thumbnail(const SlideSource& slide, int max_dim) {
  if (max_dim < 16) throw UsageError("thumbnail max_dim must be >= 16");
  const int64_t w = slide.width(), h = slide.height();
  const int64_t longest = std::max(w, h);
  int tw = static_cast<int>(w), th = static_cast<int>(h);
  if (longest > max_dim) {
    tw = static_cast<int>(std::max<int64_t>(1, std::llround(static_cast<double>(w) * max_dim / longest)));
    th = static_cast<int>(std::max<int64_t>(1, std::llround(static_cast<double>(h) * max_dim / longest)));
  }
  Thumbnail t;
  t.scale = static_cast<double>(w) / tw;
  t.scale_y = static_cast<double>(h) / th;
  t.image = RasterImage(tw, th, 255);
  // Bands keep the level-0 working set bounded on large slides.
  constexpr int kBandRows = 128;
  for (int ty = 0; ty < th; ty += kBandRows) {
    const int rows = std::min(kBandRows, th - ty);
    const Rect band{0.0, ty * t.scale_y, static_cast<double>(w), (ty + rows) * t.scale_y};
    t.image.paste(slide.read_region_scaled(band, tw, rows), 0, ty);
  }
  return t;
}

void write_pyramidal_tiff(const std::filesystem::path& path, const RasterImage& level0, double mpp,
                          const TiffWriteOptions& options) {
  if (level0.empty()) throw UsageError("cannot write an empty slide");
  if (!(mpp > 0)) throw UsageError("mpp must be positive");
  if (options.downsamples.empty() || options.downsamples.front() != 1) {
    throw UsageError("TIFF pyramid must start at downsample 1");
  }
  if (options.tile_size <= 0 || options.tile_size % 16 != 0) {
    throw UsageError("TIFF tile size must be a positive multiple of 16");
  }
  TiffPtr tif = open_tiff(path, "w");
  const uint16_t compression = options.compress && TIFFIsCODECConfigured(COMPRESSION_ADOBE_DEFLATE)
                                   ? COMPRESSION_ADOBE_DEFLATE
                                   : COMPRESSION_NONE;
  const int ts = options.tile_size;
  for (int ds : options.downsamples) {
    const int lw = static_cast<int>((level0.width() + ds - 1) / ds);
    const int lh = static_cast<int>((level0.height() + ds - 1) / ds);
    const RasterImage level = ds == 1 ? level0 : resize_area(level0, lw, lh);
    TIFF* t = tif.get();
    TIFFSetField(t, TIFFTAG_SUBFILETYPE, ds == 1 ? 0 : FILETYPE_REDUCEDIMAGE);
    TIFFSetField(t, TIFFTAG_IMAGEWIDTH, static_cast<uint32_t>(lw));
    TIFFSetField(t, TIFFTAG_IMAGELENGTH, static_cast<uint32_t>(lh));
    TIFFSetField(t, TIFFTAG_BITSPERSAMPLE, 8);
    TIFFSetField(t, TIFFTAG_SAMPLESPERPIXEL, 3);
    TIFFSetField(t, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_RGB);
    TIFFSetField(t, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    TIFFSetField(t, TIFFTAG_COMPRESSION, compression);
    TIFFSetField(t, TIFFTAG_TILEWIDTH, static_cast<uint32_t>(ts));
    TIFFSetField(t, TIFFTAG_TILELENGTH, static_cast<uint32_t>(ts));
    TIFFSetField(t, TIFFTAG_RESOLUTIONUNIT, RESUNIT_CENTIMETER);
    TIFFSetField(t, TIFFTAG_XRESOLUTION, static_cast<float>(1e4 / (mpp * ds)));
    TIFFSetField(t, TIFFTAG_YRESOLUTION, static_cast<float>(1e4 / (mpp * ds)));
    for (int ty = 0; ty < lh; ty += ts) {
      for (int tx = 0; tx < lw; tx += ts) {
        RasterImage tile = level.crop(tx, ty, ts, ts);
        const ttile_t index = TIFFComputeTile(t, static_cast<uint32_t>(tx), static_cast<uint32_t>(ty), 0, 0);
        if (TIFFWriteEncodedTile(t, index, tile.pixels().data(),
                                 static_cast<tmsize_t>(tile.pixels().size())) < 0) {
          throw IoError("failed writing TIFF tile to " + path.string());
        }
      }
    }
    if (!TIFFWriteDirectory(t)) throw IoError("failed writing TIFF directory to " + path.string());
  }
}

}  // namespace wsinuc
