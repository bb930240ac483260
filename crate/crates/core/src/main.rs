fn main() {
    std::process::exit(voronoi_area::cli::run(std::env::args_os()));
}
