//! CSV file formats exchanged between commands.

pub mod folds;
pub mod landmarks;
pub mod manifest;
pub mod predictions;
pub mod registry;
pub mod scores;

/// Reader over in-memory CSV text; headers are validated by each format.
pub(crate) fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

pub(crate) fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

pub(crate) fn finish(writer: csv::Writer<Vec<u8>>) -> String {
    let bytes = writer.into_inner().expect("writing to memory");
    String::from_utf8(bytes).expect("fields are valid UTF-8")
}

pub(crate) fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, csv::Position::line)
}
