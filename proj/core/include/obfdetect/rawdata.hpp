#pragma once

#include <filesystem>
#include <vector>

#include "obfdetect/corpus.hpp"
#include "obfdetect/normalizer.hpp"

namespace obfdetect::norm {

// Symbolic execution of the sample followed by normalization.
RawDocument to_raw_document(const corpus::Sample& s);
std::vector<RawDocument> to_raw_documents(const std::vector<corpus::Sample>& samples);

// <dir>/docs/<id>.txt plus <dir>/index.tsv with the sample metadata.
void write_rawdata(const std::filesystem::path& dir, const std::vector<RawDocument>& docs);
std::vector<RawDocument> read_rawdata(const std::filesystem::path& dir);

}  // namespace obfdetect::norm
