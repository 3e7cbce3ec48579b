fn main() {
    std::process::exit(ppt_core::cli::run(std::env::args_os()));
}
