fn main() {
    std::process::exit(entclone::cli::run(std::env::args_os()));
}
