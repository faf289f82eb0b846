fn main() {
    std::process::exit(memoloop::cli::run(std::env::args_os()));
}
