fn main() {
    std::process::exit(dspe_otdr::cli::run());
}
