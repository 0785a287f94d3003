#include "slidewatch/collectors.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <thread>

#include "slidewatch/errors.hpp"
#include "slidewatch/util.hpp"

namespace slidewatch {

// ---------------------------------------------------------------------------
// Keywords
// ---------------------------------------------------------------------------

KeywordList::KeywordList(std::vector<std::pair<std::string, std::string>> entries) {
    for (auto& [kw, lang] : entries) {
        if (kw.empty()) throw Error("keyword list entries must be non-empty");
        entries_.push_back(Keyword{kw, lang, fold_case_utf8(kw)});
    }
    if (entries_.empty()) throw Error("keyword list must be non-empty");
}

KeywordList KeywordList::load(const std::filesystem::path& csv) {
    std::ifstream in(csv);
    if (!in) throw IoError("cannot open keyword file " + csv.string());
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r" || line[0] == '#') continue;
        const auto f = split_csv_line(line);
        if (f.empty() || f.size() > 2)
            throw Error("keyword line " + std::to_string(lineno) + " must be 'keyword,language'");
        if (lineno == 1 && f[0] == "keyword") continue;
        entries.emplace_back(f[0], f.size() == 2 ? f[1] : "und");
    }
    return KeywordList(std::move(entries));
}

std::vector<std::string> KeywordList::languages() const {
    std::set<std::string> langs;
    for (const Keyword& k : entries_) langs.insert(k.language);
    return {langs.begin(), langs.end()};
}

bool matches_keywords(const std::string& text, const KeywordList& keywords) {
    const std::string folded = fold_case_utf8(text);
    for (const Keyword& k : keywords.entries()) {
        if (folded.find(k.folded) != std::string::npos) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// URL handling
// ---------------------------------------------------------------------------

std::string normalize_url(const std::string& url) {
    std::string out = url;
    const auto frag = out.find('#');
    if (frag != std::string::npos) out.erase(frag);

    // Lowercase scheme and host only; path and query stay verbatim.
    const auto scheme_end = out.find("://");
    std::size_t host_end = out.size();
    if (scheme_end != std::string::npos) {
        host_end = out.find('/', scheme_end + 3);
        if (host_end == std::string::npos) host_end = out.size();
    } else {
        host_end = 0;
    }
    for (std::size_t i = 0; i < host_end; ++i)
        out[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(out[i])));
    return out;
}

std::string image_content_id(const std::string& url) {
    return content_digest_hex(normalize_url(url));
}

std::string image_filename(const std::string& url) {
    const std::string normalized = normalize_url(url);
    std::string ext;
    auto path_end = normalized.find('?');
    if (path_end == std::string::npos) path_end = normalized.size();
    const auto last_slash = normalized.rfind('/', path_end == 0 ? 0 : path_end - 1);
    const auto last_dot = normalized.rfind('.', path_end == 0 ? 0 : path_end - 1);
    if (last_dot != std::string::npos &&
        (last_slash == std::string::npos || last_dot > last_slash)) {
        const std::string candidate = normalized.substr(last_dot, path_end - last_dot);
        const bool plausible =
            candidate.size() >= 2 && candidate.size() <= 6 &&
            std::all_of(candidate.begin() + 1, candidate.end(),
                        [](char c) { return std::isalnum(static_cast<unsigned char>(c)); });
        if (plausible) ext = candidate;
    }
    return content_digest_hex(normalized) + ext;
}

UrlDedupMap::UrlDedupMap(std::optional<std::size_t> capacity) : capacity_(capacity) {
    if (capacity_ && *capacity_ == 0) throw Error("url dedup capacity must be >= 1");
}

UrlDedupMap::CheckResult UrlDedupMap::check_and_record(const std::string& url) {
    if (url.empty()) throw Error("url must be non-empty");
    const std::string key = normalize_url(url);

    std::lock_guard lock(mu_);
    const auto it = seen_.find(key);
    if (it != seen_.end()) return CheckResult{false, it->second.first};

    if (capacity_ && seen_.size() >= *capacity_) {
        seen_.erase(order_.front());
        order_.pop_front();
    }
    order_.push_back(key);
    const std::uint64_t seq = next_seq_++;
    seen_.emplace(key, std::make_pair(seq, std::prev(order_.end())));
    return CheckResult{true, seq};
}

std::size_t UrlDedupMap::size() const {
    std::lock_guard lock(mu_);
    return seen_.size();
}

// ---------------------------------------------------------------------------
// Sources and fetchers
// ---------------------------------------------------------------------------

ReplaySource::ReplaySource(const std::filesystem::path& corpus, double rate_per_second)
    : in_(corpus), interval_s_(rate_per_second > 0.0 ? 1.0 / rate_per_second : 0.0),
      next_emit_(std::chrono::steady_clock::now()) {
    if (!in_) throw IoError("cannot open corpus " + corpus.string());
}

std::optional<std::string> ReplaySource::next() {
    std::string line;
    while (std::getline(in_, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (interval_s_ > 0.0) {
            std::this_thread::sleep_until(next_emit_);
            next_emit_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                std::chrono::duration<double>(interval_s_));
        }
        return line;
    }
    return std::nullopt;
}

FetchResult DirectoryFetcher::fetch(const std::string& url) {
    const auto path = dir_ / image_filename(url);
    std::ifstream in(path, std::ios::binary);
    if (!in) return FetchResult{false, "", "not found: " + path.string()};
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return FetchResult{true, std::move(bytes), ""};
}

FetchResult MapFetcher::fetch(const std::string& url) {
    const auto it = by_url_.find(url);
    if (it == by_url_.end()) return FetchResult{false, "", "not found: " + url};
    return FetchResult{true, it->second, ""};
}

// ---------------------------------------------------------------------------
// Collector workers
// ---------------------------------------------------------------------------

TweetCollectorSummary run_tweet_collector(StreamSource& source, const KeywordList& keywords,
                                          DocStore& tweet_index, Queue<ImageRef>& out_refs) {
    TweetCollectorSummary summary;
    while (auto raw = source.next()) {
        ++summary.seen;
        Tweet t;
        try {
            t = parse_tweet(*raw);
        } catch (const Error&) {
            ++summary.parse_errors;
            continue;
        }
        if (!matches_keywords(t.text, keywords)) continue;
        ++summary.matched;
        tweet_index.put(t.id, serialize_tweet(t));
        for (ImageRef& ref : extract_image_refs(t)) {
            out_refs.push(std::move(ref));
            ++summary.refs_pushed;
        }
    }
    return summary;
}

ImageCollectorSummary run_image_collector(Queue<ImageRef>& in_refs, Fetcher& fetcher,
                                          UrlDedupMap& dedup, const std::filesystem::path& out_dir,
                                          Queue<ImageItem>& out_images,
                                          const ImageCollectorOptions& options) {
    ImageCollectorSummary summary;
    const auto images_dir = out_dir / "images";
    std::filesystem::create_directories(images_dir);

    while (auto ref = in_refs.pop_wait()) {
        ++summary.refs_in;
        if (!dedup.check_and_record(ref->url).first_seen) {
            ++summary.skipped_duplicate;
            continue;
        }

        FetchResult result;
        auto backoff = options.backoff;
        for (int attempt = 0; attempt <= options.retries; ++attempt) {
            result = fetcher.fetch(ref->url);
            if (result.ok) break;
            if (attempt < options.retries && !fetcher.offline()) {
                std::this_thread::sleep_for(backoff);
                backoff *= 2;
            }
        }
        if (!result.ok) {
            ++summary.fetch_failures;
            continue;
        }

        const std::string filename = image_filename(ref->url);
        const auto path = images_dir / filename;
        {
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            out.write(result.bytes.data(),
                      static_cast<std::streamsize>(result.bytes.size()));
            if (!out) {
                ++summary.write_failures;
                continue;
            }
        }

        ImageItem item;
        item.record.tweet_id = ref->tweet_id;
        item.record.url = ref->url;
        item.record.local_path = "images/" + filename;
        item.record.bytes_len = result.bytes.size();
        item.bytes = std::make_shared<const std::string>(std::move(result.bytes));
        out_images.push(std::move(item));
        ++summary.fetched;
    }
    return summary;
}

} // namespace slidewatch
