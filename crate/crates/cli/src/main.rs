fn main() {
    std::process::exit(chainstack::run(std::env::args_os()));
}
