fn main() {
    std::process::exit(fts_service::cli::main());
}
