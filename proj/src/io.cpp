#include "tftsim/io.hpp"

#include "tftsim/errors.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace tft {

namespace fs = std::filesystem;

std::string fmt_num(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    if (x == 0)
        return "0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

struct CsvWriter::Impl {
    std::ofstream os;
    bool first = true;
    size_t cols = 0, cur = 0;
    std::string path;
};

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header) : impl_(new Impl)
{
    impl_->os.open(path, std::ios::binary);
    impl_->path = path.string();
    if (!impl_->os) {
        delete impl_;
        throw ConfigError("cannot write " + path.string());
    }
    impl_->cols = header.size();
    for (size_t i = 0; i < header.size(); ++i)
        impl_->os << (i ? "," : "") << header[i];
    impl_->os << '\n';
}

CsvWriter::~CsvWriter() { delete impl_; }

CsvWriter& CsvWriter::operator<<(const std::string& s)
{
    if (s.find_first_of(",\"\n") != std::string::npos)
        throw ConfigError("CSV cell contains a separator: " + s);
    impl_->os << (impl_->cur ? "," : "") << s;
    ++impl_->cur;
    return *this;
}

CsvWriter& CsvWriter::operator<<(double x) { return *this << fmt_num(x); }

CsvWriter& CsvWriter::operator<<(int x) { return *this << std::to_string(x); }

void CsvWriter::end_row()
{
    if (impl_->cur != impl_->cols)
        throw std::logic_error("CSV row width mismatch in " + impl_->path);
    impl_->os << '\n';
    impl_->cur = 0;
}

int CsvTable::column(const std::string& name) const
{
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return static_cast<int>(i);
    return -1;
}

CsvTable read_csv(const fs::path& path)
{
    std::ifstream is(path);
    if (!is)
        throw ConfigError("cannot read " + path.string());
    CsvTable t;
    std::string line;
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::stringstream ss(l);
        std::string c;
        while (std::getline(ss, c, ','))
            cells.push_back(c);
        if (!l.empty() && l.back() == ',')
            cells.emplace_back();
        return cells;
    };
    if (!std::getline(is, line))
        throw ConfigError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    t.header = split(line);
    int row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        auto cells = split(line);
        if (cells.size() != t.header.size())
            throw ConfigError(path.string() + ": row " + std::to_string(row) + " has " +
                              std::to_string(cells.size()) + " cells, header has " +
                              std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    return t;
}

std::string sha256_hex(const std::string& bytes)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
        throw NumericError("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
        s += hex[md[i] >> 4];
        s += hex[md[i] & 15];
    }
    return s;
}

std::string read_text(const fs::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw ConfigError("cannot write " + path.string());
    os << text;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

OutputStage::OutputStage(fs::path out_dir) : out_(std::move(out_dir))
{
    std::error_code ec;
    created_ = !fs::exists(out_);
    fs::create_directories(out_, ec);
    if (ec)
        throw ConfigError("cannot create output directory " + out_.string() + ": " + ec.message());
    std::random_device rd;
    for (int attempt = 0; attempt < 16; ++attempt) {
        const fs::path p = out_ / (".stage-" + std::to_string(rd()));
        if (fs::create_directory(p, ec)) {
            stage_ = p;
            return;
        }
    }
    throw ConfigError("cannot create a staging directory in " + out_.string());
}

OutputStage::~OutputStage()
{
    std::error_code ec;
    fs::remove_all(stage_, ec);
    if (!committed_ && created_)
        fs::remove(out_, ec); // only succeeds while empty
}

fs::path OutputStage::file(const std::string& name)
{
    names_.push_back(name);
    return stage_ / name;
}

void OutputStage::commit()
{
    for (const auto& n : names_) {
        if (!fs::exists(stage_ / n))
            throw std::logic_error("staged output was never written: " + n);
        fs::rename(stage_ / n, out_ / n);
    }
    committed_ = true;
}

} // namespace tft
