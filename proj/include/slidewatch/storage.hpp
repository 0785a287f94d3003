#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace slidewatch {

// Append-only document store backing the Tweet Index, Image Index and any
// other persistence surface. One log file per store:
//
//   header:  "SWDS" magic, u32 format version (little-endian)
//   records: u32 payload length (little-endian) + payload bytes
//
// Each payload is a JSON envelope {"doc": "<raw document bytes>", "id": "..."}
// so that arbitrary document bytes round-trip exactly and the id map can be
// rebuilt on reopen. Re-putting an id appends a new version; the latest wins.
// A torn tail (truncated mid-record) is detected on open, reported, and
// trimmed so the store stays appendable.
class DocStore {
public:
    static constexpr char kMagic[4] = {'S', 'W', 'D', 'S'};
    static constexpr std::uint32_t kFormatVersion = 1;

    DocStore(std::string name, std::filesystem::path path);
    ~DocStore();

    DocStore(const DocStore&) = delete;
    DocStore& operator=(const DocStore&) = delete;

    /// Appends a document version and indexes it. Single-writer contract.
    void put(const std::string& id, const std::string& doc);

    /// Latest version's raw bytes, or nullopt if the id was never written.
    std::optional<std::string> get_raw(const std::string& id) const;

    /// Latest version decoded as JSON. Throws ParseError if the stored
    /// document is not valid JSON.
    std::optional<nlohmann::json> get(const std::string& id) const;

    struct ScanResult {
        std::vector<std::pair<std::string, nlohmann::json>> matches;
        std::size_t visited = 0;
        std::size_t corrupt_skipped = 0;
    };

    /// Visits the latest version of every document in first-write order and
    /// collects those matching `pred`. Undecodable documents are counted and
    /// skipped.
    ScanResult scan(const std::function<bool(const nlohmann::json&)>& pred) const;

    /// Distinct ids currently stored.
    std::size_t count() const;

    const std::string& name() const { return name_; }
    const std::filesystem::path& path() const { return path_; }

    /// Bytes discarded from a torn tail during the last open (0 if clean).
    std::uint64_t recovered_bytes() const { return recovered_bytes_; }

    /// Ids in first-write order.
    std::vector<std::string> ids() const;

private:
    struct Slot {
        std::uint64_t offset = 0; // payload offset in the log
        std::uint32_t length = 0; // payload length
    };

    void open_or_create();
    std::string read_payload(const Slot& slot) const;
    std::string envelope(const std::string& id, const std::string& doc) const;

    mutable std::mutex mu_;
    std::string name_;
    std::filesystem::path path_;
    int fd_ = -1;
    std::uint64_t end_offset_ = 0;
    std::unordered_map<std::string, Slot> index_;
    std::vector<std::string> first_write_order_;
    std::uint64_t recovered_bytes_ = 0;
};

} // namespace slidewatch
