fn main() {
    std::process::exit(textshift::cli::run(std::env::args_os()));
}
