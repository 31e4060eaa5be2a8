#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nrpose/dictionary.hpp"
#include "nrpose/error.hpp"
#include "nrpose/mathcore.hpp"
#include "nrpose/netpbm.hpp"
#include "nrpose/rng.hpp"

namespace nrpose {

namespace fs = std::filesystem;

struct Dims {
    Index rows = 64;
    Index cols = 64;

    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Parses "64x64" (rows x cols) or a single number for square images.
inline Dims parse_dims(const std::string& text) {
    const auto x = text.find_first_of("xX");
    try {
        std::size_t used = 0;
        if (x == std::string::npos) {
            const int n = std::stoi(text, &used);
            if (used == text.size() && n > 0)
                return {n, n};
        } else {
            const std::string a = text.substr(0, x), b = text.substr(x + 1);
            std::size_t ua = 0, ub = 0;
            const int r = std::stoi(a, &ua), c = std::stoi(b, &ub);
            if (ua == a.size() && ub == b.size() && r > 0 && c > 0)
                return {r, c};
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("cannot parse dimensions '" + text + "' (expected ROWSxCOLS)");
}

inline std::string to_string(const Dims& d) { return std::to_string(d.rows) + "x" + std::to_string(d.cols); }

struct LabeledImage {
    ImageMatrix image;
    PoseLabel label;
    std::string source;  ///< file path or synthetic id
};

// ---------------------------------------------------------------------------
// Ingestion

inline constexpr int kMinImageSide = 8;

namespace detail {

/// Bilinear resampling with pixel-centre alignment. Identity when sizes match.
inline ImageMatrix resize_bilinear(const ImageMatrix& src, Index rows, Index cols) {
    if (src.rows() == rows && src.cols() == cols)
        return src;
    ImageMatrix out(rows, cols);
    const double sy = static_cast<double>(src.rows()) / static_cast<double>(rows);
    const double sx = static_cast<double>(src.cols()) / static_cast<double>(cols);
    for (Index i = 0; i < rows; ++i) {
        const double fy = std::clamp((static_cast<double>(i) + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.rows() - 1));
        const Index y0 = static_cast<Index>(std::floor(fy));
        const Index y1 = std::min(y0 + 1, src.rows() - 1);
        const double wy = fy - static_cast<double>(y0);
        for (Index j = 0; j < cols; ++j) {
            const double fx =
                std::clamp((static_cast<double>(j) + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.cols() - 1));
            const Index x0 = static_cast<Index>(std::floor(fx));
            const Index x1 = std::min(x0 + 1, src.cols() - 1);
            const double wx = fx - static_cast<double>(x0);
            out(i, j) = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                        wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
        }
    }
    return out;
}

} // namespace detail

/// Converts a raster to luminance in [0, 1], centre-crops it to the target
/// aspect ratio and resizes it bilinearly to `target`.
inline ImageMatrix raster_to_image(const Raster& r, Dims target, const std::string& source = "raster") {
    if (r.width < kMinImageSide || r.height < kMinImageSide)
        throw IngestionError(source, "image is " + std::to_string(r.width) + "x" + std::to_string(r.height) +
                                         ", smaller than the 8x8 minimum");
    if (target.rows < 1 || target.cols < 1)
        throw ConfigError("target dimensions must be positive");
    const double scale = 1.0 / static_cast<double>(r.maxval);
    ImageMatrix full(r.height, r.width);
    for (int i = 0; i < r.height; ++i) {
        for (int j = 0; j < r.width; ++j) {
            double v = 0.0;
            if (r.channels == 1)
                v = r.at(i, j);
            else
                v = 0.299 * r.at(i, j, 0) + 0.587 * r.at(i, j, 1) + 0.114 * r.at(i, j, 2);
            full(i, j) = v * scale;
        }
    }
    // largest centred window with the target aspect ratio
    const double aspect = static_cast<double>(target.cols) / static_cast<double>(target.rows);
    Index crop_h = r.height, crop_w = r.width;
    if (static_cast<double>(r.width) > aspect * r.height)
        crop_w = std::max<Index>(1, std::llround(aspect * r.height));
    else
        crop_h = std::max<Index>(1, std::llround(r.width / aspect));
    const Index top = (r.height - crop_h) / 2, left = (r.width - crop_w) / 2;
    ImageMatrix out = detail::resize_bilinear(full.block(top, left, crop_h, crop_w), target.rows, target.cols);
    return out.cwiseMax(0.0).cwiseMin(1.0);
}

inline ImageMatrix load_image(const fs::path& path, Dims target = {}) {
    return raster_to_image(read_netpbm(path), target, path.string());
}

inline bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

/// Image files in `dir`, sorted by file name.
inline std::vector<fs::path> list_images(const fs::path& dir) {
    std::vector<fs::path> out;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec))
        if (entry.is_regular_file() && is_image_file(entry.path()))
            out.push_back(entry.path());
    if (ec)
        throw ManifestError("cannot list directory " + dir.string() + ": " + ec.message());
    std::sort(out.begin(), out.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    return out;
}

// ---------------------------------------------------------------------------
// Manifest

/// Dataset layout: root/<yaw>/<images>. When `test_root` is set the test split
/// lives under the same layout there; otherwise the test images are the
/// `test_per_class` files following the training ones in each class folder.
struct DatasetManifest {
    fs::path root;
    std::optional<fs::path> test_root;
    std::vector<PoseLabel> classes = PoseLabel::all();
    int per_class_count = 50;
    int test_per_class = 20;
    Dims dims{64, 64};

    fs::path class_dir(PoseLabel c) const { return root / c.to_string(); }
    fs::path test_class_dir(PoseLabel c) const { return (test_root ? *test_root : root) / c.to_string(); }

    void validate() const {
        if (classes.empty())
            throw ManifestError("manifest declares no classes");
        if (per_class_count < 1)
            throw ManifestError("per_class_count must be >= 1");
        if (test_per_class < 0)
            throw ManifestError("test_per_class must be >= 0");
        for (PoseLabel c : classes) {
            const fs::path dir = class_dir(c);
            if (!fs::is_directory(dir))
                throw ManifestError("class " + c.to_string() + ": directory " + dir.string() + " does not exist");
            const auto n = list_images(dir).size();
            if (n < static_cast<std::size_t>(per_class_count))
                throw ManifestError("class " + c.to_string() + ": " + std::to_string(n) + " images, need " +
                                    std::to_string(per_class_count));
        }
    }
};

/// Parses flat `key = value` text. Blank lines and `#` comments are ignored.
inline std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source) {
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ManifestError(source + ":" + std::to_string(lineno) + ": expected key = value");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

/// Keys: root, test_root, classes (comma list of yaws), per_class_count,
/// test_per_class, dims. Relative paths resolve against the manifest's folder.
inline DatasetManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ManifestError("cannot open manifest " + path.string());
    const auto kv = parse_key_values(in, path.string());
    const fs::path base = path.parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    auto to_int = [&](const std::string& key, const std::string& v) {
        try {
            std::size_t used = 0;
            const int n = std::stoi(v, &used);
            if (used == v.size())
                return n;
        } catch (const std::exception&) {
        }
        throw ManifestError(path.string() + ": " + key + " must be an integer, got '" + v + "'");
    };

    DatasetManifest m;
    bool have_root = false;
    for (const auto& [key, value] : kv) {
        if (key == "root") {
            m.root = resolve(value);
            have_root = true;
        } else if (key == "test_root") {
            m.test_root = resolve(value);
        } else if (key == "per_class_count") {
            m.per_class_count = to_int(key, value);
        } else if (key == "test_per_class") {
            m.test_per_class = to_int(key, value);
        } else if (key == "dims") {
            try {
                m.dims = parse_dims(value);
            } catch (const ConfigError& e) {
                throw ManifestError(path.string() + ": " + e.what());
            }
        } else if (key == "classes") {
            m.classes.clear();
            std::stringstream ss(value);
            for (std::string tok; std::getline(ss, tok, ',');) {
                try {
                    m.classes.push_back(PoseLabel::parse(tok));
                } catch (const ConfigError& e) {
                    throw ManifestError(path.string() + ": " + e.what());
                }
            }
            std::sort(m.classes.begin(), m.classes.end());
            m.classes.erase(std::unique(m.classes.begin(), m.classes.end()), m.classes.end());
        } else {
            throw ManifestError(path.string() + ": unknown key '" + key + "'");
        }
    }
    if (!have_root)
        throw ManifestError(path.string() + ": missing 'root'");
    return m;
}

inline void write_manifest(const fs::path& path, const DatasetManifest& m) {
    std::ofstream out(path);
    if (!out)
        throw ManifestError("cannot write manifest " + path.string());
    out << "root = " << m.root.generic_string() << "\n";
    if (m.test_root)
        out << "test_root = " << m.test_root->generic_string() << "\n";
    out << "classes = ";
    for (std::size_t i = 0; i < m.classes.size(); ++i)
        out << (i ? "," : "") << m.classes[i].degrees();
    out << "\nper_class_count = " << m.per_class_count << "\ntest_per_class = " << m.test_per_class
        << "\ndims = " << to_string(m.dims) << "\n";
}

/// Atoms ordered by ascending yaw, then file name; the first per_class_count
/// images of each class.
inline TrainingDictionary build_dictionary(const DatasetManifest& m) {
    m.validate();
    TrainingDictionary dict;
    dict.per_class_count = m.per_class_count;
    for (PoseLabel c : m.classes) {
        const auto files = list_images(m.class_dir(c));
        for (int k = 0; k < m.per_class_count; ++k) {
            dict.atoms.push_back(load_image(files[static_cast<std::size_t>(k)], m.dims));
            dict.labels.push_back(c);
        }
    }
    return dict;
}

/// Test images per class, ascending yaw then file name.
inline std::vector<LabeledImage> load_test_set(const DatasetManifest& m) {
    std::vector<LabeledImage> out;
    for (PoseLabel c : m.classes) {
        const fs::path dir = m.test_class_dir(c);
        if (!fs::is_directory(dir))
            throw ManifestError("class " + c.to_string() + ": test directory " + dir.string() + " does not exist");
        const auto files = list_images(dir);
        const std::size_t first = m.test_root ? 0 : static_cast<std::size_t>(m.per_class_count);
        const std::size_t need = first + static_cast<std::size_t>(m.test_per_class);
        if (files.size() < need)
            throw ManifestError("class " + c.to_string() + ": " + std::to_string(files.size()) +
                                " images, need " + std::to_string(need) + " for the test split");
        for (std::size_t k = first; k < need; ++k)
            out.push_back({load_image(files[k], m.dims), c, files[k].string()});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Occlusion

struct OcclusionSpec {
    double axis_fraction = 0.0;  ///< block side as a fraction of each axis
    double fill_value = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(axis_fraction >= 0.0 && axis_fraction <= 1.0))
            throw ConfigError("occlusion fraction must lie in [0, 1]");
        if (!(fill_value >= 0.0 && fill_value <= 1.0))
            throw ConfigError("occlusion fill value must lie in [0, 1]");
    }
};

struct OcclusionBlock {
    Index top = 0;
    Index left = 0;
    Index rows = 0;
    Index cols = 0;
};

/// Block geometry for image number `image_index` under `spec`. Every
/// (seed, image_index) pair draws from its own generator stream.
inline OcclusionBlock occlusion_block(Index rows, Index cols, const OcclusionSpec& spec,
                                      std::uint64_t image_index = 0) {
    spec.validate();
    OcclusionBlock b;
    b.rows = static_cast<Index>(std::llround(spec.axis_fraction * static_cast<double>(rows)));
    b.cols = static_cast<Index>(std::llround(spec.axis_fraction * static_cast<double>(cols)));
    CounterRng rng(spec.seed, image_index);
    b.top = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(rows - b.rows + 1)));
    b.left = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(cols - b.cols + 1)));
    return b;
}

/// Overwrites one randomly placed block of round(f*m) x round(f*n) pixels
/// with the fill value.
inline ImageMatrix apply_block_occlusion(const ImageMatrix& img, const OcclusionSpec& spec,
                                         std::uint64_t image_index = 0) {
    const OcclusionBlock b = occlusion_block(img.rows(), img.cols(), spec, image_index);
    ImageMatrix out = img;
    out.block(b.top, b.left, b.rows, b.cols).setConstant(spec.fill_value);
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
    std::uint64_t seed = 1;
    int n_classes = 7;
    int train_per_class = 50;
    int test_per_class = 20;
    Dims dims{64, 64};
    double noise_sigma = 0.03;

    void validate() const {
        if (n_classes < 1 || n_classes > 7)
            throw ConfigError("synthetic class count must be in [1, 7]");
        if (train_per_class < 1)
            throw ConfigError("synthetic train_per_class must be >= 1");
        if (test_per_class < 0)
            throw ConfigError("synthetic test_per_class must be >= 0");
        if (dims.rows < 1 || dims.cols < 1)
            throw ConfigError("synthetic dimensions must be positive");
        if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
            throw ConfigError("noise_sigma must be finite and >= 0");
    }
};

struct SyntheticDataset {
    TrainingDictionary train;
    std::vector<LabeledImage> test;
    std::vector<PoseLabel> classes;        ///< ascending yaw
    std::vector<ImageMatrix> prototypes;   ///< parallel to classes
    double min_prototype_distance = 0.0;   ///< smallest pairwise Frobenius distance

    const ImageMatrix& prototype(PoseLabel c) const {
        for (std::size_t k = 0; k < classes.size(); ++k)
            if (classes[k] == c)
                return prototypes[k];
        throw LookupError("no synthetic prototype for class " + c.to_string());
    }
};

/// Pose classes used for n synthetic classes: frontal first, then the
/// nearest angles, left before right. Returned in ascending yaw.
inline std::vector<PoseLabel> synthetic_classes(int n) {
    static constexpr int kOrder[7] = {0, -30, 30, -60, 60, -90, 90};
    std::vector<PoseLabel> out;
    for (int k = 0; k < n && k < 7; ++k)
        out.push_back(PoseLabel::from_degrees(kOrder[k]));
    std::sort(out.begin(), out.end());
    return out;
}

/// Smooth class prototype: an oriented sinusoidal grating on a weak linear
/// ramp (orientation indexed by class) plus a Gaussian bump whose horizontal
/// position tracks the yaw. Phase is drawn per class from the seed.
inline ImageMatrix synthetic_prototype(PoseLabel c, Dims dims, std::uint64_t seed) {
    constexpr double kGrating = 0.35, kFrequency = 2.5, kRamp = 0.06, kBump = 0.25, kBumpWidth = 0.3;
    const double orientation = 2.0 * std::numbers::pi * static_cast<double>(c.index()) / 7.0;
    CounterRng rng(seed, 0xC1A55000ULL + c.index());
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    const double shift = 0.5 * c.degrees() / 90.0;
    ImageMatrix p(dims.rows, dims.cols);
    for (Index i = 0; i < dims.rows; ++i) {
        const double v = (static_cast<double>(i) + 0.5) / static_cast<double>(dims.rows) * 2.0 - 1.0;
        for (Index j = 0; j < dims.cols; ++j) {
            const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(dims.cols) * 2.0 - 1.0;
            const double d = u * std::cos(orientation) + v * std::sin(orientation);
            const double r2 = (u - shift) * (u - shift) + (v + 0.1) * (v + 0.1);
            const double val = 0.5 + kRamp * d + kGrating * std::sin(std::numbers::pi * kFrequency * d + phase) +
                               kBump * std::exp(-r2 / (2.0 * kBumpWidth * kBumpWidth)) - 0.5 * kBump;
            p(i, j) = std::clamp(val, 0.0, 1.0);
        }
    }
    return p;
}

/// Deterministic per seed. Each sample is clamp(prototype + N(0, sigma^2)).
inline SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticDataset ds;
    ds.classes = synthetic_classes(spec.n_classes);
    for (PoseLabel c : ds.classes)
        ds.prototypes.push_back(synthetic_prototype(c, spec.dims, spec.seed));

    ds.min_prototype_distance = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < ds.prototypes.size(); ++a)
        for (std::size_t b = a + 1; b < ds.prototypes.size(); ++b)
            ds.min_prototype_distance =
                std::min(ds.min_prototype_distance, (ds.prototypes[a] - ds.prototypes[b]).norm());

    auto sample = [&](std::size_t k, int split, int index) {
        const std::uint64_t stream = (static_cast<std::uint64_t>(split) << 48) |
                                     (static_cast<std::uint64_t>(ds.classes[k].index()) << 32) |
                                     static_cast<std::uint64_t>(index);
        CounterRng rng(spec.seed, stream);
        ImageMatrix img = ds.prototypes[k];
        if (spec.noise_sigma > 0.0)
            for (Index j = 0; j < img.cols(); ++j)
                for (Index i = 0; i < img.rows(); ++i)
                    img(i, j) = std::clamp(img(i, j) + spec.noise_sigma * rng.normal(), 0.0, 1.0);
        return img;
    };

    ds.train.per_class_count = spec.train_per_class;
    for (std::size_t k = 0; k < ds.classes.size(); ++k) {
        for (int i = 0; i < spec.train_per_class; ++i) {
            ds.train.atoms.push_back(sample(k, 1, i));
            ds.train.labels.push_back(ds.classes[k]);
        }
    }
    for (std::size_t k = 0; k < ds.classes.size(); ++k)
        for (int i = 0; i < spec.test_per_class; ++i)
            ds.test.push_back({sample(k, 2, i), ds.classes[k],
                               "synthetic:" + ds.classes[k].to_string() + ":" + std::to_string(i)});
    return ds;
}

/// Writes out_dir/train/<yaw>/*.pgm, out_dir/test/<yaw>/*.pgm and
/// out_dir/manifest.txt. Returns the manifest path.
inline fs::path write_synthetic_dataset(const SyntheticDataset& ds, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw DataError("cannot create " + out_dir.string() + ": " + ec.message());
    auto dump = [&](const std::string& split, PoseLabel c, int index, const ImageMatrix& img) {
        const fs::path dir = out_dir / split / c.to_string();
        fs::create_directories(dir);
        char name[32];
        std::snprintf(name, sizeof name, "img_%04d.pgm", index);
        write_pgm(dir / name, img);
    };
    std::map<PoseLabel, int> counter;
    for (std::size_t j = 0; j < ds.train.size(); ++j)
        dump("train", ds.train.labels[j], counter[ds.train.labels[j]]++, ds.train.atoms[j]);
    counter.clear();
    for (const auto& t : ds.test)
        dump("test", t.label, counter[t.label]++, t.image);

    DatasetManifest m;
    m.root = "train";
    m.test_root = fs::path("test");
    m.classes = ds.classes;
    m.per_class_count = ds.train.per_class_count;
    m.test_per_class = ds.classes.empty() ? 0 : static_cast<int>(ds.test.size() / ds.classes.size());
    m.dims = {ds.train.rows(), ds.train.cols()};
    const fs::path manifest = out_dir / "manifest.txt";
    write_manifest(manifest, m);
    return manifest;
}

} // namespace nrpose
