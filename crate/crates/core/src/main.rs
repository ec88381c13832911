fn main() {
    std::process::exit(mpfscope::cli::run(std::env::args_os()));
}
