#include "slidewatch/dedup.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <fcntl.h>
#include <unistd.h>

#include "slidewatch/errors.hpp"
#include "slidewatch/util.hpp"

namespace slidewatch {

namespace {

// Squared L2 distance with monotone early exit: partial sums of squares only
// grow, so once the running sum exceeds `bound_sq` the entry cannot beat the
// current best and the scan moves on. Returns +inf in that case. The first
// check comes after a short block so far-apart vectors are rejected almost
// immediately; later checks are spaced out to keep the hot loop tight.
double l2_sq_bounded(std::span<const float> a, std::span<const float> b, double bound_sq) {
    double sum = 0.0;
    const std::size_t n = a.size();
    std::size_t i = 0;
    std::size_t block = 8;
    while (i < n) {
        const std::size_t block_end = std::min(n, i + block);
        for (; i < block_end; ++i) {
            const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
            sum += d * d;
        }
        if (sum > bound_sq) return std::numeric_limits<double>::infinity();
        block = 64;
    }
    return sum;
}

void write_all(int fd, const void* data, std::size_t len) {
    const char* p = static_cast<const char*>(data);
    while (len > 0) {
        const ssize_t n = ::write(fd, p, len);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError(std::string("feature index write failed: ") + std::strerror(errno));
        }
        p += n;
        len -= static_cast<std::size_t>(n);
    }
}

constexpr char kIndexMagic[4] = {'S', 'W', 'F', 'I'};
constexpr std::uint32_t kIndexVersion = 1;

void write_index_header(int fd, std::uint32_t dim) {
    unsigned char header[12];
    std::memcpy(header, kIndexMagic, 4);
    header[4] = static_cast<unsigned char>(kIndexVersion);
    header[5] = static_cast<unsigned char>(kIndexVersion >> 8);
    header[6] = static_cast<unsigned char>(kIndexVersion >> 16);
    header[7] = static_cast<unsigned char>(kIndexVersion >> 24);
    header[8] = static_cast<unsigned char>(dim);
    header[9] = static_cast<unsigned char>(dim >> 8);
    header[10] = static_cast<unsigned char>(dim >> 16);
    header[11] = static_cast<unsigned char>(dim >> 24);
    write_all(fd, header, sizeof header);
}

std::uint32_t load_u32le(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

// Reads every (id, vector) record of an index/sidecar file.
template <typename Fn>
void read_index_file(const std::filesystem::path& path, std::size_t expected_dim, Fn&& on_record) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open feature file " + path.string());
    unsigned char header[12];
    in.read(reinterpret_cast<char*>(header), sizeof header);
    if (in.gcount() != sizeof header || std::memcmp(header, kIndexMagic, 4) != 0)
        throw IoError("feature file " + path.string() + " has an unrecognized header");
    if (load_u32le(header + 4) != kIndexVersion)
        throw IoError("feature file " + path.string() + " has an unsupported version");
    const std::uint32_t dim = load_u32le(header + 8);
    if (dim != expected_dim)
        throw DimensionMismatch(dim, expected_dim);

    for (;;) {
        unsigned char lenbuf[4];
        in.read(reinterpret_cast<char*>(lenbuf), 4);
        if (in.gcount() == 0) break;
        if (in.gcount() != 4) throw IoError("feature file " + path.string() + " truncated");
        const std::uint32_t id_len = load_u32le(lenbuf);
        std::string id(id_len, '\0');
        in.read(id.data(), id_len);
        std::vector<float> values(dim);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(dim * sizeof(float)));
        if (!in) throw IoError("feature file " + path.string() + " truncated");
        on_record(std::move(id), std::move(values));
    }
}

} // namespace

double l2_distance(const FeatureVector& a, const FeatureVector& b) {
    if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
    return std::sqrt(
        l2_sq_bounded(a.values, b.values, std::numeric_limits<double>::infinity()));
}

FeatureIndex::FeatureIndex(std::size_t dim) : dim_(dim) {}

FeatureIndex::~FeatureIndex() {
    if (fd_ >= 0) ::close(fd_);
}

FeatureIndex::FeatureIndex(FeatureIndex&& other) noexcept
    : dim_(other.dim_), entries_(std::move(other.entries_)), ids_(std::move(other.ids_)),
      fd_(other.fd_) {
    other.fd_ = -1;
}

FeatureIndex& FeatureIndex::operator=(FeatureIndex&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        dim_ = other.dim_;
        entries_ = std::move(other.entries_);
        ids_ = std::move(other.ids_);
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

FeatureIndex FeatureIndex::open(const std::filesystem::path& path, std::size_t dim) {
    FeatureIndex idx(dim);
    if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
        read_index_file(path, dim, [&](std::string id, std::vector<float> values) {
            idx.ids_.insert(id);
            idx.entries_.push_back(Entry{std::move(id), std::move(values)});
        });
    }
    idx.fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (idx.fd_ < 0)
        throw IoError("cannot open feature index " + path.string() + ": " + std::strerror(errno));
    if (idx.entries_.empty() && ::lseek(idx.fd_, 0, SEEK_END) == 0)
        write_index_header(idx.fd_, static_cast<std::uint32_t>(dim));
    return idx;
}

DuplicateVerdict FeatureIndex::find_duplicate(const FeatureVector& fv, double threshold) const {
    if (fv.dim() != dim_) throw DimensionMismatch(fv.dim(), dim_);
    if (threshold < 0.0) throw Error("duplicate threshold must be >= 0");

    double best_sq = std::numeric_limits<double>::infinity();
    const Entry* best = nullptr;
    const double bound_sq =
        std::isinf(threshold) ? std::numeric_limits<double>::infinity() : threshold * threshold;

    for (const Entry& e : entries_) {
        const double limit = std::min(best_sq, bound_sq);
        const double d_sq = l2_sq_bounded(fv.values, e.values, limit);
        if (d_sq < best_sq && d_sq <= bound_sq) {
            best_sq = d_sq;
            best = &e;
            if (best_sq == 0.0) break; // nothing can beat an exact match
        }
    }

    DuplicateVerdict v;
    if (best != nullptr) {
        v.is_duplicate = true;
        v.ref_id = best->id;
        v.distance = std::sqrt(best_sq);
    }
    return v;
}

void FeatureIndex::insert(const std::string& id, const FeatureVector& fv) {
    if (fv.dim() != dim_) throw DimensionMismatch(fv.dim(), dim_);
    if (!ids_.insert(id).second) throw Error("feature index already contains id '" + id + "'");
    entries_.push_back(Entry{id, fv.values});
    if (fd_ >= 0) append_record(entries_.back());
}

void FeatureIndex::append_record(const Entry& e) {
    unsigned char lenbuf[4];
    const auto id_len = static_cast<std::uint32_t>(e.id.size());
    lenbuf[0] = static_cast<unsigned char>(id_len);
    lenbuf[1] = static_cast<unsigned char>(id_len >> 8);
    lenbuf[2] = static_cast<unsigned char>(id_len >> 16);
    lenbuf[3] = static_cast<unsigned char>(id_len >> 24);
    write_all(fd_, lenbuf, 4);
    write_all(fd_, e.id.data(), e.id.size());
    write_all(fd_, e.values.data(), e.values.size() * sizeof(float));
}

void FeatureIndex::save(const std::filesystem::path& path) const {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0)
        throw IoError("cannot create feature index " + path.string() + ": " + std::strerror(errno));
    try {
        write_index_header(fd, static_cast<std::uint32_t>(dim_));
        for (const Entry& e : entries_) {
            unsigned char lenbuf[4];
            const auto id_len = static_cast<std::uint32_t>(e.id.size());
            lenbuf[0] = static_cast<unsigned char>(id_len);
            lenbuf[1] = static_cast<unsigned char>(id_len >> 8);
            lenbuf[2] = static_cast<unsigned char>(id_len >> 16);
            lenbuf[3] = static_cast<unsigned char>(id_len >> 24);
            write_all(fd, lenbuf, 4);
            write_all(fd, e.id.data(), e.id.size());
            write_all(fd, e.values.data(), e.values.size() * sizeof(float));
        }
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
}

StubFeatureExtractor::StubFeatureExtractor(std::size_t dim, double scale, std::uint64_t seed)
    : dim_(dim), scale_(scale), seed_(seed) {}

FeatureVector StubFeatureExtractor::extract(std::string_view bytes,
                                            const std::string& owner_id) const {
    FeatureVector fv;
    fv.owner_id = owner_id;
    fv.values.resize(dim_);
    std::uint64_t state = fnv1a64(bytes) ^ seed_;
    for (std::size_t i = 0; i < dim_; ++i)
        fv.values[i] = static_cast<float>(splitmix_unit(state) * scale_);
    return fv;
}

PrecomputedFeatureExtractor::PrecomputedFeatureExtractor(const std::filesystem::path& sidecar,
                                                         std::size_t dim)
    : dim_(dim) {
    read_index_file(sidecar, dim, [&](std::string id, std::vector<float> values) {
        vectors_[std::move(id)] = std::move(values);
    });
}

FeatureVector PrecomputedFeatureExtractor::extract(std::string_view /*bytes*/,
                                                   const std::string& owner_id) const {
    const auto it = vectors_.find(owner_id);
    if (it == vectors_.end())
        throw LookupError("no precomputed feature vector", owner_id);
    FeatureVector fv;
    fv.owner_id = owner_id;
    fv.values = it->second;
    return fv;
}

// ---------------------------------------------------------------------------
// MCC and threshold tuning
// ---------------------------------------------------------------------------

double mcc(const ConfusionMatrix& cm) {
    const double tp = static_cast<double>(cm.tp);
    const double fp = static_cast<double>(cm.fp);
    const double fn = static_cast<double>(cm.fn);
    const double tn = static_cast<double>(cm.tn);
    const double d1 = tp + fp;
    const double d2 = tp + fn;
    const double d3 = tn + fp;
    const double d4 = tn + fn;
    if (d1 == 0.0 || d2 == 0.0 || d3 == 0.0 || d4 == 0.0) return 0.0;
    return (tp * tn - fp * fn) / std::sqrt(d1 * d2 * d3 * d4);
}

namespace {

using u128 = unsigned __int128;

// MCC as an exact rational-over-root: numerator tp*tn - fp*fn and the product
// of the four marginal sums. A zero denominator encodes the value-0
// convention.
struct MccTerms {
    std::int64_t n = 0;
    u128 d = 0;
};

MccTerms mcc_terms(const ConfusionMatrix& cm) {
    MccTerms t;
    const u128 f1 = cm.tp + cm.fp;
    const u128 f2 = cm.tp + cm.fn;
    const u128 f3 = cm.tn + cm.fp;
    const u128 f4 = cm.tn + cm.fn;
    if (f1 == 0 || f2 == 0 || f3 == 0 || f4 == 0) return t;
    t.n = static_cast<std::int64_t>(cm.tp * cm.tn) - static_cast<std::int64_t>(cm.fp * cm.fn);
    t.d = f1 * f2 * f3 * f4;
    return t;
}

// Compares n1/sqrt(d1) vs n2/sqrt(d2) without floating point when the cross
// products fit in 128 bits (pair sets up to ~60k items); falls back to long
// double beyond that.
int compare_mcc(const MccTerms& a, const MccTerms& b) {
    const int s1 = a.d == 0 ? 0 : (a.n > 0 ? 1 : (a.n < 0 ? -1 : 0));
    const int s2 = b.d == 0 ? 0 : (b.n > 0 ? 1 : (b.n < 0 ? -1 : 0));
    if (s1 != s2) return s1 < s2 ? -1 : 1;
    if (s1 == 0) return 0;

    const u128 a1 = static_cast<u128>(a.n < 0 ? -a.n : a.n);
    const u128 a2 = static_cast<u128>(b.n < 0 ? -b.n : b.n);
    if (a1 < (u128(1) << 31) && a2 < (u128(1) << 31) && a.d < (u128(1) << 64) &&
        b.d < (u128(1) << 64)) {
        const u128 lhs = a1 * a1 * b.d;
        const u128 rhs = a2 * a2 * a.d;
        const int mag = lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
        return s1 > 0 ? mag : -mag;
    }
    const long double v1 = static_cast<long double>(a.n) / sqrtl(static_cast<long double>(a.d));
    const long double v2 = static_cast<long double>(b.n) / sqrtl(static_cast<long double>(b.d));
    return v1 < v2 ? -1 : (v1 > v2 ? 1 : 0);
}

} // namespace

ThresholdTuneResult tune_threshold(std::span<const LabeledPair> pairs, double t_min, double t_max,
                                   double step) {
    if (pairs.empty()) throw Error("tune_threshold needs a non-empty pair set");
    if (step <= 0.0) throw Error("tune_threshold step must be > 0");
    for (const LabeledPair& p : pairs) {
        if (!std::isfinite(p.distance) || p.distance < 0.0)
            throw Error("labeled pair distances must be finite and >= 0");
    }

    // Sort once; prefix sums give the confusion matrix at any cut.
    std::vector<LabeledPair> sorted(pairs.begin(), pairs.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const LabeledPair& a, const LabeledPair& b) {
                         return a.distance < b.distance;
                     });
    const std::uint64_t total = sorted.size();
    std::uint64_t total_dup = 0;
    for (const LabeledPair& p : sorted) total_dup += p.is_duplicate ? 1 : 0;
    const std::uint64_t total_nondup = total - total_dup;

    const auto grid_points =
        static_cast<std::size_t>(std::floor((t_max - t_min) / step + 1e-9)) + 1;

    ThresholdTuneResult result;
    result.curve.reserve(grid_points);

    std::size_t cursor = 0; // first pair with distance > t
    std::uint64_t dup_below = 0;
    MccTerms best_terms;
    bool have_best = false;

    for (std::size_t g = 0; g < grid_points; ++g) {
        const double t = t_min + static_cast<double>(g) * step;
        while (cursor < sorted.size() && sorted[cursor].distance <= t) {
            dup_below += sorted[cursor].is_duplicate ? 1 : 0;
            ++cursor;
        }
        ConfusionMatrix cm;
        cm.tp = dup_below;
        cm.fp = cursor - dup_below;
        cm.fn = total_dup - cm.tp;
        cm.tn = total_nondup - cm.fp;

        const double value = mcc(cm);
        result.curve.emplace_back(t, value);

        const MccTerms terms = mcc_terms(cm);
        if (!have_best || compare_mcc(terms, best_terms) > 0) {
            have_best = true;
            best_terms = terms;
            result.best_threshold = t;
            result.best_mcc = value;
        }
    }
    return result;
}

std::vector<LabeledPair> load_labeled_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open labeled pairs file " + path.string());
    std::vector<LabeledPair> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 2)
            throw Error("labeled pairs line " + std::to_string(lineno) +
                        " must be 'distance,is_duplicate'");
        if (lineno == 1 && fields[0] == "distance") continue; // header
        LabeledPair p;
        try {
            p.distance = std::stod(fields[0]);
        } catch (const std::exception&) {
            throw Error("bad distance on labeled pairs line " + std::to_string(lineno));
        }
        p.is_duplicate = fields[1] == "1" || fields[1] == "true";
        pairs.push_back(p);
    }
    return pairs;
}

} // namespace slidewatch
