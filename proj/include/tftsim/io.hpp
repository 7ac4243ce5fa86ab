#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace tft {

// Fixed 12-significant-digit rendering used by every numeric artifact, so reruns
// are byte-identical.
std::string fmt_num(double x);

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    CsvWriter& operator<<(double x);
    CsvWriter& operator<<(int x);
    CsvWriter& operator<<(const std::string& s);
    void end_row();

private:
    struct Impl;
    Impl* impl_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const; // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Collects an experiment's files in a staging directory next to `out_dir` and
// moves them into place only on commit(); an uncommitted stage is removed.
class OutputStage {
public:
    explicit OutputStage(std::filesystem::path out_dir);
    ~OutputStage();
    OutputStage(const OutputStage&) = delete;
    OutputStage& operator=(const OutputStage&) = delete;

    std::filesystem::path file(const std::string& name); // registers the name
    const std::vector<std::string>& files() const { return names_; }
    const std::filesystem::path& staging_dir() const { return stage_; }
    void commit();

private:
    std::filesystem::path out_, stage_;
    std::vector<std::string> names_;
    bool committed_ = false;
    bool created_ = false;
};

} // namespace tft
