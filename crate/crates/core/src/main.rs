fn main() {
    std::process::exit(safebasin::cli::run(std::env::args_os()));
}
