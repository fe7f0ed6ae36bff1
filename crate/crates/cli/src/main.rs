fn main() {
    std::process::exit(rieszlab_cli::run(std::env::args_os()));
}
