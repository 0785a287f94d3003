#include "slidewatch/storage.hpp"

#include <cerrno>
#include <cstring>

#include <fcntl.h>
#include <unistd.h>

#include "slidewatch/errors.hpp"

namespace slidewatch {

using nlohmann::json;

namespace {

constexpr std::uint32_t kMaxPayload = 1u << 30; // sanity cap against corrupt lengths

void write_all(int fd, const void* data, std::size_t len, const std::string& what) {
    const char* p = static_cast<const char*>(data);
    while (len > 0) {
        const ssize_t n = ::write(fd, p, len);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError("write failed for " + what + ": " + std::strerror(errno));
        }
        p += n;
        len -= static_cast<std::size_t>(n);
    }
}

bool read_exact(int fd, std::uint64_t offset, void* out, std::size_t len) {
    char* p = static_cast<char*>(out);
    while (len > 0) {
        const ssize_t n = ::pread(fd, p, len, static_cast<off_t>(offset));
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        if (n == 0) return false; // EOF
        p += n;
        offset += static_cast<std::uint64_t>(n);
        len -= static_cast<std::size_t>(n);
    }
    return true;
}

std::uint32_t load_u32le(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

void store_u32le(std::uint32_t v, unsigned char* b) {
    b[0] = static_cast<unsigned char>(v);
    b[1] = static_cast<unsigned char>(v >> 8);
    b[2] = static_cast<unsigned char>(v >> 16);
    b[3] = static_cast<unsigned char>(v >> 24);
}

} // namespace

DocStore::DocStore(std::string name, std::filesystem::path path)
    : name_(std::move(name)), path_(std::move(path)) {
    open_or_create();
}

DocStore::~DocStore() {
    if (fd_ >= 0) ::close(fd_);
}

void DocStore::open_or_create() {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw IoError("cannot open store " + path_.string() + ": " + std::strerror(errno));

    const auto file_size = static_cast<std::uint64_t>(::lseek(fd_, 0, SEEK_END));

    unsigned char header[8];
    if (file_size == 0) {
        std::memcpy(header, kMagic, 4);
        store_u32le(kFormatVersion, header + 4);
        write_all(fd_, header, sizeof header, name_);
        end_offset_ = sizeof header;
        return;
    }

    if (file_size < sizeof header || !read_exact(fd_, 0, header, sizeof header) ||
        std::memcmp(header, kMagic, 4) != 0)
        throw IoError("store " + path_.string() + " has an unrecognized header");
    if (load_u32le(header + 4) != kFormatVersion)
        throw IoError("store " + path_.string() + " has an unsupported format version");

    // Replay the log; stop at the first torn record and trim it.
    std::uint64_t off = sizeof header;
    while (off < file_size) {
        unsigned char lenbuf[4];
        if (off + 4 > file_size || !read_exact(fd_, off, lenbuf, 4)) break;
        const std::uint32_t len = load_u32le(lenbuf);
        if (len == 0 || len > kMaxPayload || off + 4 + len > file_size) break;

        std::string payload(len, '\0');
        if (!read_exact(fd_, off + 4, payload.data(), len)) break;

        try {
            const json env = json::parse(payload);
            std::string id = env.at("id").get<std::string>();
            if (index_.find(id) == index_.end()) first_write_order_.push_back(id);
            index_[std::move(id)] = Slot{off + 4, len};
        } catch (const json::exception&) {
            break; // treat an undecodable envelope as a torn tail
        }
        off += 4 + len;
    }
    if (off < file_size) {
        recovered_bytes_ = file_size - off;
        if (::ftruncate(fd_, static_cast<off_t>(off)) != 0)
            throw IoError("cannot trim torn tail of " + path_.string());
    }
    end_offset_ = off;
    ::lseek(fd_, static_cast<off_t>(off), SEEK_SET);
}

std::string DocStore::envelope(const std::string& id, const std::string& doc) const {
    return json{{"doc", doc}, {"id", id}}.dump();
}

void DocStore::put(const std::string& id, const std::string& doc) {
    if (id.empty()) throw SchemaError("document id must be non-empty", "id");
    const std::string payload = envelope(id, doc);
    if (payload.size() > kMaxPayload) throw IoError("document too large for store " + name_);

    std::lock_guard lock(mu_);
    unsigned char lenbuf[4];
    store_u32le(static_cast<std::uint32_t>(payload.size()), lenbuf);
    write_all(fd_, lenbuf, 4, name_);
    write_all(fd_, payload.data(), payload.size(), name_);

    if (index_.find(id) == index_.end()) first_write_order_.push_back(id);
    index_[id] = Slot{end_offset_ + 4, static_cast<std::uint32_t>(payload.size())};
    end_offset_ += 4 + payload.size();
}

std::string DocStore::read_payload(const Slot& slot) const {
    std::string payload(slot.length, '\0');
    if (!read_exact(fd_, slot.offset, payload.data(), slot.length))
        throw IoError("short read from store " + name_);
    return payload;
}

std::optional<std::string> DocStore::get_raw(const std::string& id) const {
    Slot slot;
    {
        std::lock_guard lock(mu_);
        const auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        slot = it->second;
    }
    const json env = json::parse(read_payload(slot));
    return env.at("doc").get<std::string>();
}

std::optional<nlohmann::json> DocStore::get(const std::string& id) const {
    const auto raw = get_raw(id);
    if (!raw) return std::nullopt;
    try {
        return json::parse(*raw);
    } catch (const json::parse_error& e) {
        throw ParseError("corrupt document '" + id + "' in store " + name_ + ": " + e.what(),
                         e.byte);
    }
}

DocStore::ScanResult DocStore::scan(const std::function<bool(const nlohmann::json&)>& pred) const {
    std::vector<std::pair<std::string, Slot>> snapshot;
    {
        std::lock_guard lock(mu_);
        snapshot.reserve(first_write_order_.size());
        for (const std::string& id : first_write_order_)
            snapshot.emplace_back(id, index_.at(id));
    }
    ScanResult result;
    for (auto& [id, slot] : snapshot) {
        ++result.visited;
        json doc;
        try {
            const json env = json::parse(read_payload(slot));
            doc = json::parse(env.at("doc").get<std::string>());
        } catch (const json::exception&) {
            ++result.corrupt_skipped;
            continue;
        }
        if (pred(doc)) result.matches.emplace_back(id, std::move(doc));
    }
    return result;
}

std::size_t DocStore::count() const {
    std::lock_guard lock(mu_);
    return index_.size();
}

std::vector<std::string> DocStore::ids() const {
    std::lock_guard lock(mu_);
    return first_write_order_;
}

} // namespace slidewatch
